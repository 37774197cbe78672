#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pktcam/nn/adam.hpp"
#include "pktcam/nn/dataset.hpp"
#include "pktcam/nn/metrics.hpp"
#include "pktcam/nn/model.hpp"

namespace pktcam::nn {

struct TrainConfig {
    int epochs = 10;
    std::size_t batch_size = 128;
    AdamConfig adam;
    double split_fraction = 0.8;
    std::uint64_t seed = 0;
    std::optional<std::size_t> undersample_target;
};

struct EpochResult {
    int epoch = 0; ///< 0 is the evaluation of the untrained model when no epochs run
    double train_loss = 0.0;
    EvalReport eval;
};

struct TrainResult {
    CnnModel<float> model;
    std::vector<EpochResult> history;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

using EpochCallback = std::function<void(const EpochResult&)>;

/**
 * Optional undersampling, stratified split, then minibatch Adam with the held-out
 * split evaluated after every epoch. Every random choice derives from cfg.seed.
 */
TrainResult train(CnnModel<float> model, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

std::vector<int> predict(const CnnModel<float>& model, const Dataset& data);
EvalReport evaluate(const CnnModel<float>& model, const Dataset& data);

} // namespace pktcam::nn
