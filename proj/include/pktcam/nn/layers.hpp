#pragma once

#include <span>
#include <vector>

#include "pktcam/nn/tensor.hpp"

namespace pktcam::nn {

/**
 * Stride-1 convolution with "same" zero padding of (kernel - 1) / 2 per side.
 *
 * weights is (out_channels, in_channels * kernel): element (o, i * kernel + k)
 * is w[o][i][k], which is also the on-disk (out, in, kernel) order.
 */
template <class T>
struct ConvLayer {
    Tensor<T> weights;
    Vec<T> bias;
    int kernel = 1;

    int out_channels() const { return static_cast<int>(weights.rows()); }
    int in_channels() const { return static_cast<int>(weights.cols()) / kernel; }
    T& w(int o, int i, int k) { return weights(o, i * kernel + k); }
    T w(int o, int i, int k) const { return weights(o, i * kernel + k); }
};

/// Unfolds a zero-padded (in, L) input into (in * kernel, L) columns.
template <class T>
Tensor<T> im2col(const Tensor<T>& input, int kernel);

/// In-place form; reuses the storage of `cols` when the shape is unchanged.
template <class T>
void im2col(const Tensor<T>& input, int kernel, Tensor<T>& cols);

/// Adds (in * kernel, L) column gradients back onto an (in, L) input gradient.
template <class T>
Tensor<T> col2im(const Tensor<T>& cols, int in_channels, int kernel);

template <class T>
void col2im(const Tensor<T>& cols, int in_channels, int kernel, Tensor<T>& out);

/// out[o][x] = bias[o] + sum_i sum_k w[o][i][k] * padded_in[i][x + k]. Throws ShapeError.
template <class T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const ConvLayer<T>& layer);

/// Same as above into caller-owned buffers, keeping the unfolded input for the backward pass.
template <class T>
void conv1d_forward(const Tensor<T>& input, const ConvLayer<T>& layer, Tensor<T>& cols, Tensor<T>& out);

/**
 * Accumulates parameter gradients into `grad`; writes the input gradient when
 * `d_input` is non-null, using `d_cols` as scratch if given.
 */
template <class T>
void conv1d_backward(const Tensor<T>& d_output, const Tensor<T>& cols, const ConvLayer<T>& layer,
                     ConvLayer<T>& grad, Tensor<T>* d_input, Tensor<T>* d_cols = nullptr);

template <class T>
void relu_inplace(Tensor<T>& x) {
    x = x.cwiseMax(T(0));
}

template <class T>
Tensor<T> relu(Tensor<T> x) {
    relu_inplace(x);
    return x;
}

/// Zeroes gradient entries where the activation was clipped.
template <class T>
void relu_backward_inplace(Tensor<T>& d, const Tensor<T>& activated) {
    d = (activated.array() > T(0)).select(d, T(0));
}

/// Per-channel mean over the length axis, accumulated in double.
template <class T>
Vec<T> gap(const Tensor<T>& feature_maps);

/// Softmax in double precision; sums to 1 within rounding.
template <class T>
std::vector<double> softmax(const Vec<T>& logits);

} // namespace pktcam::nn
