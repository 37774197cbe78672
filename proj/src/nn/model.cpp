#include "pktcam/nn/model.hpp"

#include <cmath>

#include "pktcam/error.hpp"
#include "pktcam/parallel.hpp"
#include "pktcam/rng.hpp"

namespace pktcam::nn {

void ModelConfig::validate() const {
    if (channel_widths.empty()) throw ShapeError("model needs at least one convolutional layer");
    for (int w : channel_widths) {
        if (w <= 0) throw ShapeError("channel widths must be positive");
    }
    if (kernel_size <= 0 || kernel_size % 2 == 0) {
        throw ShapeError("kernel size must be odd and positive, got " + std::to_string(kernel_size));
    }
    if (num_classes <= 0) throw ShapeError("num_classes must be positive");
    if (input_len <= 0 || in_channels <= 0) throw ShapeError("input shape must be positive");
}

ModelConfig ModelConfig::model1(int kernel_size, int num_classes) {
    ModelConfig c;
    c.arch = "model1";
    c.channel_widths = {16, 32, 64, 128};
    c.kernel_size = kernel_size;
    c.num_classes = num_classes;
    return c;
}

ModelConfig ModelConfig::model2(int kernel_size, int num_classes) {
    ModelConfig c;
    c.arch = "model2";
    c.channel_widths = {16, 32, 64, 64, 64, 64, 64, 128};
    c.kernel_size = kernel_size;
    c.num_classes = num_classes;
    return c;
}

ModelConfig ModelConfig::named(const std::string& arch, int kernel_size, int num_classes) {
    if (arch == "model1") return model1(kernel_size, num_classes);
    if (arch == "model2") return model2(kernel_size, num_classes);
    throw ShapeError("unknown architecture '" + arch + "' (expected model1 or model2)");
}

template <class T>
Parameters<T> Parameters<T>::zeros_like() const {
    Parameters z;
    z.conv.reserve(conv.size());
    for (const auto& layer : conv) {
        z.conv.push_back(ConvLayer<T>{Tensor<T>::Zero(layer.weights.rows(), layer.weights.cols()),
                                      Vec<T>::Zero(layer.bias.size()), layer.kernel});
    }
    z.dense.weights = Tensor<T>::Zero(dense.weights.rows(), dense.weights.cols());
    z.dense.bias = Vec<T>::Zero(dense.bias.size());
    return z;
}

template <class T>
std::size_t Parameters<T>::count() const {
    std::size_t n = 0;
    for (const auto& v : views()) n += v.size();
    return n;
}

template <class T>
std::vector<std::span<T>> Parameters<T>::views() {
    std::vector<std::span<T>> out;
    for (auto& layer : conv) {
        out.emplace_back(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
        out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    out.emplace_back(dense.weights.data(), static_cast<std::size_t>(dense.weights.size()));
    out.emplace_back(dense.bias.data(), static_cast<std::size_t>(dense.bias.size()));
    return out;
}

template <class T>
std::vector<std::span<const T>> Parameters<T>::views() const {
    std::vector<std::span<const T>> out;
    for (const auto& layer : conv) {
        out.emplace_back(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
        out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    out.emplace_back(dense.weights.data(), static_cast<std::size_t>(dense.weights.size()));
    out.emplace_back(dense.bias.data(), static_cast<std::size_t>(dense.bias.size()));
    return out;
}

template <class T>
Parameters<T>& Parameters<T>::operator+=(const Parameters& other) {
    for (std::size_t l = 0; l < conv.size(); ++l) {
        conv[l].weights += other.conv[l].weights;
        conv[l].bias += other.conv[l].bias;
    }
    dense.weights += other.dense.weights;
    dense.bias += other.dense.bias;
    return *this;
}

template <class T>
template <class U>
CnnModel<U> CnnModel<T>::cast() const {
    CnnModel<U> out;
    out.config = config;
    out.class_names = class_names;
    for (const auto& layer : params.conv) {
        out.params.conv.push_back(
            ConvLayer<U>{layer.weights.template cast<U>(), layer.bias.template cast<U>(), layer.kernel});
    }
    out.params.dense.weights = params.dense.weights.template cast<U>();
    out.params.dense.bias = params.dense.bias.template cast<U>();
    return out;
}

template <class T>
CnnModel<T> init_model(const ModelConfig& config, std::vector<std::string> class_names, std::uint64_t seed) {
    config.validate();
    if (!class_names.empty() && static_cast<int>(class_names.size()) != config.num_classes) {
        throw ShapeError("class name count does not match num_classes");
    }
    CnnModel<T> model;
    model.config = config;
    model.class_names = std::move(class_names);
    Rng rng(seed);

    int in = config.in_channels;
    for (int out : config.channel_widths) {
        ConvLayer<T> layer{Tensor<T>(out, in * config.kernel_size), Vec<T>::Zero(out), config.kernel_size};
        const double limit = std::sqrt(6.0 / (in * config.kernel_size));
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
            layer.weights.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
        }
        model.params.conv.push_back(std::move(layer));
        in = out;
    }
    auto& dense = model.params.dense;
    dense.weights.resize(config.num_classes, in);
    const double limit = std::sqrt(6.0 / (in + config.num_classes));
    for (Eigen::Index i = 0; i < dense.weights.size(); ++i) {
        dense.weights.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
    }
    dense.bias = Vec<T>::Zero(config.num_classes);
    return model;
}

template <class T>
int ForwardResult<T>::predicted() const {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return static_cast<int>(best);
}

namespace {

/**
 * Activations and unfolded inputs of one forward pass, kept for backprop,
 * plus backward scratch. Reused across samples so the large buffers are
 * allocated once per worker rather than once per layer and sample.
 */
template <class T>
struct Trace {
    std::vector<Tensor<T>> activations; ///< [0] is the input, [l + 1] the ReLU output of conv layer l
    std::vector<Tensor<T>> cols;
    Tensor<T> d;
    Tensor<T> d_in;
    Tensor<T> d_cols;
};

template <class T>
ForwardResult<T> run_forward(const CnnModel<T>& model, std::span<const T> input, Trace<T>& trace) {
    const auto& cfg = model.config;
    const std::size_t expected = static_cast<std::size_t>(cfg.in_channels) * static_cast<std::size_t>(cfg.input_len);
    if (input.size() != expected) {
        throw ShapeError("model input must have " + std::to_string(expected) + " values, got " +
                         std::to_string(input.size()));
    }
    const std::size_t layers = model.params.conv.size();
    trace.activations.resize(layers + 1);
    trace.cols.resize(layers);
    trace.activations[0] = Eigen::Map<const Tensor<T>>(input.data(), cfg.in_channels, cfg.input_len);
    for (std::size_t l = 0; l < layers; ++l) {
        conv1d_forward(trace.activations[l], model.params.conv[l], trace.cols[l], trace.activations[l + 1]);
        relu_inplace(trace.activations[l + 1]);
    }
    const Tensor<T>& x = trace.activations[layers];

    ForwardResult<T> r;
    r.pooled = gap(x);
    const auto& dense = model.params.dense;
    // Accumulate in double so that logits agree with the CAM identity to rounding.
    const Vec<double> logits =
        dense.weights.template cast<double>() * r.pooled.template cast<double>() + dense.bias.template cast<double>();
    r.logits = logits.template cast<T>();
    r.probabilities = softmax(r.logits);
    r.last_feature_maps = x;
    return r;
}

template <class T>
Trace<T>& thread_trace() {
    thread_local Trace<T> trace;
    return trace;
}

template <class T>
double accumulate_sample(const CnnModel<T>& model, std::span<const T> input, int label, double scale,
                         Parameters<T>& grads, Trace<T>& trace) {
    ForwardResult<T> fwd = run_forward(model, input, trace);

    const Eigen::Index classes = fwd.logits.size();
    const double peak = static_cast<double>(fwd.logits.maxCoeff());
    double sum_exp = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) sum_exp += std::exp(static_cast<double>(fwd.logits(c)) - peak);
    const double loss = -(static_cast<double>(fwd.logits(label)) - peak - std::log(sum_exp));

    Vec<T> d_logits(classes);
    for (Eigen::Index c = 0; c < classes; ++c) {
        const double target = c == label ? 1.0 : 0.0;
        d_logits(c) = static_cast<T>(scale * (fwd.probabilities[static_cast<std::size_t>(c)] - target));
    }
    const auto& dense = model.params.dense;
    grads.dense.weights.noalias() += d_logits * fwd.pooled.transpose();
    if (model.config.dense_bias) grads.dense.bias += d_logits;

    // GAP spreads each pooled gradient uniformly over the length axis.
    const Vec<T> d_pooled = dense.weights.transpose() * d_logits;
    const Eigen::Index len = fwd.last_feature_maps.cols();
    trace.d = (d_pooled / static_cast<T>(len)).replicate(1, len);

    for (std::size_t l = model.params.conv.size(); l-- > 0;) {
        relu_backward_inplace(trace.d, trace.activations[l + 1]);
        conv1d_backward(trace.d, trace.cols[l], model.params.conv[l], grads.conv[l], l > 0 ? &trace.d_in : nullptr,
                        &trace.d_cols);
        if (l > 0) trace.d.swap(trace.d_in);
    }
    return loss;
}

constexpr std::size_t kGradChunk = 8;

} // namespace

template <class T>
ForwardResult<T> forward(const CnnModel<T>& model, std::span<const T> input) {
    return run_forward<T>(model, input, thread_trace<T>());
}

ForwardResult<float> forward(const CnnModel<float>& model, const FeatureVector& input) {
    return run_forward<float>(model, std::span<const float>(input.normalized), thread_trace<float>());
}

template <class T>
LossAndGradients<T> loss_and_gradients(const CnnModel<T>& model, std::span<const T> inputs,
                                       std::span<const int> labels) {
    const std::size_t batch = labels.size();
    const std::size_t sample_len =
        static_cast<std::size_t>(model.config.in_channels) * static_cast<std::size_t>(model.config.input_len);
    if (batch == 0) throw DataError("empty batch");
    if (inputs.size() != batch * sample_len) throw ShapeError("batch input size does not match label count");
    for (int y : labels) {
        if (y < 0 || y >= model.config.num_classes) {
            throw DataError("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(model.config.num_classes) + ")");
        }
    }

    const std::size_t chunks = (batch + kGradChunk - 1) / kGradChunk;
    std::vector<Parameters<T>> partial(chunks);
    std::vector<double> partial_loss(chunks, 0.0);
    const double scale = 1.0 / static_cast<double>(batch);
    parallel_for(chunks, [&](std::size_t c) {
        partial[c] = model.params.zeros_like();
        Trace<T>& trace = thread_trace<T>();
        const std::size_t end = std::min(batch, (c + 1) * kGradChunk);
        for (std::size_t i = c * kGradChunk; i < end; ++i) {
            partial_loss[c] += accumulate_sample(model, inputs.subspan(i * sample_len, sample_len), labels[i], scale,
                                                 partial[c], trace);
        }
    });

    LossAndGradients<T> out;
    out.grads = std::move(partial[0]);
    double loss = partial_loss[0];
    for (std::size_t c = 1; c < chunks; ++c) {
        out.grads += partial[c];
        loss += partial_loss[c];
    }
    out.loss = loss * scale;
    return out;
}

template struct Parameters<float>;
template struct Parameters<double>;
template struct ForwardResult<float>;
template struct ForwardResult<double>;
template CnnModel<double> CnnModel<float>::cast<double>() const;
template CnnModel<float> CnnModel<double>::cast<float>() const;
template CnnModel<float> CnnModel<float>::cast<float>() const;
template CnnModel<double> CnnModel<double>::cast<double>() const;
template CnnModel<float> init_model<float>(const ModelConfig&, std::vector<std::string>, std::uint64_t);
template CnnModel<double> init_model<double>(const ModelConfig&, std::vector<std::string>, std::uint64_t);
template ForwardResult<float> forward<float>(const CnnModel<float>&, std::span<const float>);
template ForwardResult<double> forward<double>(const CnnModel<double>&, std::span<const double>);
template LossAndGradients<float> loss_and_gradients<float>(const CnnModel<float>&, std::span<const float>,
                                                           std::span<const int>);
template LossAndGradients<double> loss_and_gradients<double>(const CnnModel<double>&, std::span<const double>,
                                                             std::span<const int>);

} // namespace pktcam::nn
