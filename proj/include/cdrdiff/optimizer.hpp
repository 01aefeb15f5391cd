/**
 * Adaptive-moment optimizer with bias correction and decoupled weight decay.
 */

#pragma once

#include <cstdint>
#include <vector>

#include "cdrdiff/tensor.hpp"

namespace cdrdiff {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    /// Global gradient-norm clip; 0 disables clipping.
    double max_grad_norm = 0.0;
};

struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

AdamState make_adam_state(const ParameterSet& params);

/// Global L2 norm over all gradients.
double gradient_norm(const GradientSet& grads);

/// One update. Throws std::invalid_argument on shape mismatch and
/// NumericError on a non-finite gradient (parameters are left untouched).
void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace cdrdiff
