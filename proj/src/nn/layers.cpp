#include "pktcam/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pktcam/error.hpp"

namespace pktcam::nn {

template <class T>
void im2col(const Tensor<T>& input, int kernel, Tensor<T>& cols) {
    const Eigen::Index in = input.rows();
    const Eigen::Index len = input.cols();
    const Eigen::Index pad = (kernel - 1) / 2;
    cols.setZero(in * kernel, len);
    for (Eigen::Index i = 0; i < in; ++i) {
        const T* src = input.row(i).data();
        for (Eigen::Index k = 0; k < kernel; ++k) {
            T* dst = cols.row(i * kernel + k).data();
            // dst[x] = src[x + k - pad] where that index is inside the input.
            const Eigen::Index shift = k - pad;
            const Eigen::Index x0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index x1 = std::min<Eigen::Index>(len, len - shift);
            if (x1 > x0) std::copy(src + x0 + shift, src + x1 + shift, dst + x0);
        }
    }
}

template <class T>
Tensor<T> im2col(const Tensor<T>& input, int kernel) {
    Tensor<T> cols;
    im2col(input, kernel, cols);
    return cols;
}

template <class T>
void col2im(const Tensor<T>& cols, int in_channels, int kernel, Tensor<T>& out) {
    const Eigen::Index len = cols.cols();
    const Eigen::Index pad = (kernel - 1) / 2;
    out.setZero(in_channels, len);
    for (Eigen::Index i = 0; i < in_channels; ++i) {
        T* dst = out.row(i).data();
        for (Eigen::Index k = 0; k < kernel; ++k) {
            const T* src = cols.row(i * kernel + k).data();
            const Eigen::Index shift = k - pad;
            const Eigen::Index x0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index x1 = std::min<Eigen::Index>(len, len - shift);
            for (Eigen::Index x = x0; x < x1; ++x) dst[x + shift] += src[x];
        }
    }
}

template <class T>
Tensor<T> col2im(const Tensor<T>& cols, int in_channels, int kernel) {
    Tensor<T> out;
    col2im(cols, in_channels, kernel, out);
    return out;
}

namespace {

template <class T>
void check_conv_shapes(const Tensor<T>& input, const ConvLayer<T>& layer) {
    if (layer.kernel <= 0 || layer.kernel % 2 == 0) {
        throw ShapeError("conv kernel must be odd and positive, got " + std::to_string(layer.kernel));
    }
    if (layer.weights.cols() != input.rows() * layer.kernel) {
        throw ShapeError("conv expects " + std::to_string(layer.weights.cols() / layer.kernel) +
                         " input channels, got " + std::to_string(input.rows()));
    }
    if (layer.bias.size() != layer.weights.rows()) throw ShapeError("conv bias length does not match output channels");
}

} // namespace

template <class T>
void conv1d_forward(const Tensor<T>& input, const ConvLayer<T>& layer, Tensor<T>& cols, Tensor<T>& out) {
    check_conv_shapes(input, layer);
    im2col(input, layer.kernel, cols);
    out.resize(layer.weights.rows(), input.cols());
    out.noalias() = layer.weights * cols;
    out.colwise() += layer.bias;
}

template <class T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
    Tensor<T> cols, out;
    conv1d_forward(input, layer, cols, out);
    return out;
}

template <class T>
void conv1d_backward(const Tensor<T>& d_output, const Tensor<T>& cols, const ConvLayer<T>& layer,
                     ConvLayer<T>& grad, Tensor<T>* d_input, Tensor<T>* d_cols) {
    grad.weights.noalias() += d_output * cols.transpose();
    grad.bias += d_output.rowwise().sum();
    if (d_input != nullptr) {
        Tensor<T> local;
        Tensor<T>& scratch = d_cols ? *d_cols : local;
        scratch.resize(cols.rows(), cols.cols());
        scratch.noalias() = layer.weights.transpose() * d_output;
        col2im(scratch, layer.in_channels(), layer.kernel, *d_input);
    }
}

template <class T>
Vec<T> gap(const Tensor<T>& feature_maps) {
    Vec<T> out(feature_maps.rows());
    const double len = static_cast<double>(feature_maps.cols());
    for (Eigen::Index c = 0; c < feature_maps.rows(); ++c) {
        out(c) = static_cast<T>(feature_maps.row(c).template cast<double>().sum() / len);
    }
    return out;
}

template <class T>
std::vector<double> softmax(const Vec<T>& logits) {
    std::vector<double> p(static_cast<std::size_t>(logits.size()));
    if (p.empty()) return p;
    const double peak = static_cast<double>(logits.maxCoeff());
    double total = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        p[c] = std::exp(static_cast<double>(logits(static_cast<Eigen::Index>(c))) - peak);
        total += p[c];
    }
    for (double& v : p) v /= total;
    return p;
}

#define PKTCAM_INSTANTIATE_LAYERS(T)                                                                         \
    template Tensor<T> im2col<T>(const Tensor<T>&, int);                                                     \
    template void im2col<T>(const Tensor<T>&, int, Tensor<T>&);                                              \
    template Tensor<T> col2im<T>(const Tensor<T>&, int, int);                                                \
    template void col2im<T>(const Tensor<T>&, int, int, Tensor<T>&);                                         \
    template Tensor<T> conv1d_forward<T>(const Tensor<T>&, const ConvLayer<T>&);                             \
    template void conv1d_forward<T>(const Tensor<T>&, const ConvLayer<T>&, Tensor<T>&, Tensor<T>&);          \
    template void conv1d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvLayer<T>&, ConvLayer<T>&, \
                                     Tensor<T>*, Tensor<T>*);                                                \
    template Vec<T> gap<T>(const Tensor<T>&);                                                                \
    template std::vector<double> softmax<T>(const Vec<T>&);

PKTCAM_INSTANTIATE_LAYERS(float)
PKTCAM_INSTANTIATE_LAYERS(double)

} // namespace pktcam::nn
