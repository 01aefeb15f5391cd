#include "cdrdiff/optimizer.hpp"

#include <cmath>
#include <string>

namespace cdrdiff {

AdamState make_adam_state(const ParameterSet& params) {
    AdamState state;
    state.first_moment = zero_gradients(params);
    state.second_moment = zero_gradients(params);
    return state;
}

double gradient_norm(const GradientSet& grads) {
    double acc = 0.0;
    for (const auto& g : grads)
        for (double v : g.values()) acc += v * v;
    return std::sqrt(acc);
}

void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state,
               const AdamConfig& config) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw std::invalid_argument("optimizer: parameter/gradient/state counts differ");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        const Shape& shape = params.value(p).shape();
        if (grads[p].shape() != shape || state.first_moment[p].shape() != shape ||
            state.second_moment[p].shape() != shape) {
            throw std::invalid_argument("optimizer: shape mismatch for parameter " + params.name(p));
        }
        if (!grads[p].all_finite()) {
            throw NumericError("optimizer: non-finite gradient for parameter " + params.name(p));
        }
    }

    double clip = 1.0;
    if (config.max_grad_norm > 0.0) {
        const double norm = gradient_norm(grads);
        if (norm > config.max_grad_norm) clip = config.max_grad_norm / norm;
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(config.beta1, t);
    const double bias2 = 1.0 - std::pow(config.beta2, t);

    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params.value(p).values();
        auto g = grads[p].values();
        auto m = state.first_moment[p].values();
        auto v = state.second_moment[p].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] * clip;
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            if (config.weight_decay != 0.0) w[i] -= config.learning_rate * config.weight_decay * w[i];
            w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

}  // namespace cdrdiff
