#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pktcam/nn/layers.hpp"
#include "pktcam/nn/tensor.hpp"
#include "pktcam/preprocess.hpp"

namespace pktcam::nn {

/// Architecture of a same-length 1D CNN: conv stack -> ReLU -> GAP -> dense.
struct ModelConfig {
    std::string arch = "custom";
    std::vector<int> channel_widths;
    int kernel_size = 7;
    int num_classes = 2;
    int input_len = static_cast<int>(kVectorLen);
    int in_channels = 1;
    bool dense_bias = true;

    /// Throws ShapeError when the configuration cannot build a model.
    void validate() const;
    int last_channels() const { return channel_widths.back(); }

    /// 16, 32, 64, 128
    static ModelConfig model1(int kernel_size, int num_classes);
    /// 16, 32, 64, 64, 64, 64, 64, 128
    static ModelConfig model2(int kernel_size, int num_classes);
    /// "model1" / "model2"; throws ShapeError otherwise.
    static ModelConfig named(const std::string& arch, int kernel_size, int num_classes);

    bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct DenseLayer {
    Tensor<T> weights; ///< (num_classes, last_channels)
    Vec<T> bias;       ///< (num_classes); all zero and frozen when the config has no dense bias
};

/// Every trainable tensor of a model; also used for gradients and optimizer moments.
template <class T>
struct Parameters {
    std::vector<ConvLayer<T>> conv;
    DenseLayer<T> dense;

    Parameters zeros_like() const;
    std::size_t count() const;
    /// Flat views over each tensor in a fixed order: conv weights/bias per layer, dense weights, dense bias.
    std::vector<std::span<T>> views();
    std::vector<std::span<const T>> views() const;
    Parameters& operator+=(const Parameters& other);
};

template <class T>
struct CnnModel {
    ModelConfig config;
    std::vector<std::string> class_names;
    Parameters<T> params;

    template <class U>
    CnnModel<U> cast() const;
};

/// Seeded fan-in uniform initialisation; biases start at zero.
template <class T>
CnnModel<T> init_model(const ModelConfig& config, std::vector<std::string> class_names, std::uint64_t seed);

template <class T>
struct ForwardResult {
    Vec<T> logits;
    std::vector<double> probabilities;
    Tensor<T> last_feature_maps; ///< (last_channels, input_len), after ReLU
    Vec<T> pooled;               ///< gap(last_feature_maps)

    int predicted() const;
};

/// input holds in_channels * input_len values, channel-major. Throws ShapeError on a length mismatch.
template <class T>
ForwardResult<T> forward(const CnnModel<T>& model, std::span<const T> input);

ForwardResult<float> forward(const CnnModel<float>& model, const FeatureVector& input);

template <class T>
struct LossAndGradients {
    double loss = 0.0;
    Parameters<T> grads;
};

/**
 * Mean categorical cross-entropy over a batch and its gradient.
 *
 * inputs holds labels.size() samples back to back. Per-sample work fans out
 * over worker threads; partial gradients are reduced in a fixed order so the
 * result does not depend on the thread count. Throws DataError for a label
 * outside [0, num_classes).
 */
template <class T>
LossAndGradients<T> loss_and_gradients(const CnnModel<T>& model, std::span<const T> inputs,
                                       std::span<const int> labels);

} // namespace pktcam::nn
