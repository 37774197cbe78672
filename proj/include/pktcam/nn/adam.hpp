#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pktcam/error.hpp"
#include "pktcam/nn/model.hpp"

namespace pktcam::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates, one buffer per parameter.
struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
};

/**
 * One bias-corrected Adam update on a flat parameter buffer. `step` is the
 * 1-based update count after this step.
 */
template <class T>
void adam_update(std::span<T> params, std::span<const T> grads, AdamMoments& moments, std::int64_t step,
                 const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw ShapeError("parameter and gradient sizes differ");
    if (moments.m.size() != params.size()) {
        moments.m.assign(params.size(), 0.0);
        moments.v.assign(params.size(), 0.0);
    }
    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = moments.m[i] / correction1;
        const double v_hat = moments.v[i] / correction2;
        params[i] = static_cast<T>(static_cast<double>(params[i]) - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
}

/// Optimizer state for a whole model; t counts completed steps.
struct AdamState {
    std::vector<AdamMoments> moments;
    std::int64_t t = 0;
};

template <class T>
void adam_step(CnnModel<T>& model, const Parameters<T>& grads, AdamState& state, const AdamConfig& cfg) {
    auto params = model.params.views();
    const auto g = grads.views();
    if (params.size() != g.size()) throw ShapeError("gradient structure does not match model");
    if (state.moments.size() != params.size()) state.moments.assign(params.size(), AdamMoments{});
    ++state.t;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!model.config.dense_bias && i + 1 == params.size()) continue; // frozen zero dense bias
        adam_update(params[i], g[i], state.moments[i], state.t, cfg);
    }
}

} // namespace pktcam::nn
