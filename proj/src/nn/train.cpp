#include "pktcam/nn/train.hpp"

#include <numeric>

#include "pktcam/error.hpp"
#include "pktcam/parallel.hpp"
#include "pktcam/rng.hpp"

namespace pktcam::nn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kUndersampleStream = 0xD1B54A32D192ED03ull;

} // namespace

std::vector<int> predict(const CnnModel<float>& model, const Dataset& data) {
    std::vector<int> out(data.size(), 0);
    parallel_for(data.size(), [&](std::size_t i) { out[i] = forward(model, data.sample(i)).predicted(); });
    return out;
}

EvalReport evaluate(const CnnModel<float>& model, const Dataset& data) {
    if (data.num_classes() != model.config.num_classes) throw DataError("dataset and model class counts differ");
    const std::vector<int> predicted = predict(model, data);
    return report_from_predictions(data.labels, predicted, model.config.num_classes);
}

TrainResult train(CnnModel<float> model, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (cfg.epochs < 0) throw DataError("epochs must be non-negative");
    if (cfg.batch_size == 0) throw DataError("batch size must be positive");
    if (data.num_classes() != model.config.num_classes) throw DataError("dataset and model class counts differ");
    if (data.sample_len != static_cast<std::size_t>(model.config.input_len * model.config.in_channels)) {
        throw ShapeError("dataset sample length does not match model input");
    }

    const Dataset balanced =
        cfg.undersample_target ? undersample(data, *cfg.undersample_target, cfg.seed ^ kUndersampleStream) : data;
    const Split split = stratified_split(balanced, cfg.split_fraction, cfg.seed);

    TrainResult result;
    result.train_size = split.train.size();
    result.test_size = split.test.size();

    auto report = [&](EpochResult e) {
        if (on_epoch) on_epoch(e);
        result.history.push_back(std::move(e));
    };

    if (cfg.epochs == 0) {
        report(EpochResult{0, 0.0, evaluate(model, split.test)});
        result.model = std::move(model);
        return result;
    }

    Rng rng(cfg.seed ^ kShuffleStream);
    AdamState adam;
    std::vector<std::size_t> order(split.train.size());
    std::vector<float> batch_inputs;
    std::vector<int> batch_labels;
    const std::size_t len = split.train.sample_len;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch_inputs.resize((end - start) * len);
            batch_labels.resize(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto s = split.train.sample(order[i]);
                std::copy(s.begin(), s.end(), batch_inputs.begin() + static_cast<std::ptrdiff_t>((i - start) * len));
                batch_labels[i - start] = split.train.labels[order[i]];
            }
            const auto lg = loss_and_gradients<float>(model, batch_inputs, batch_labels);
            adam_step(model, lg.grads, adam, cfg.adam);
            loss_sum += lg.loss * static_cast<double>(end - start);
            seen += end - start;
        }
        report(EpochResult{epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0, evaluate(model, split.test)});
    }
    result.model = std::move(model);
    return result;
}

} // namespace pktcam::nn
