/**
 * Reverse diffusion: de novo sampling and perturb-then-denoise optimization.
 */

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cdrdiff/training.hpp"

namespace cdrdiff::diff {

struct ReverseOutput {
    DiffusionState state;
    /// Largest predicted type probability per residue.
    std::vector<double> confidence;
};

/// One step t -> t-1. Types are drawn from the predicted posterior, positions
/// and orientations get no noise at t = 1.
ReverseOutput reverse_step(const nn::DenoiserModel& model, const ComplexInstance& normalized,
                           const DiffusionState& state, const ScheduleSet& s, Rng& rng);

/// Uniform types, standard normal positions and Haar orientations at t = T.
DiffusionState prior_state(std::size_t m, const ScheduleSet& s, Rng& rng);

struct Design {
    DiffusionState state;
    std::vector<double> confidence;
    std::string sequence;
    /// Complex in the original frame with the generated region replaced.
    ComplexInstance instance;
};

/// Runs reverse steps from `start.t` down to 0.
Design denoise(const nn::DenoiserModel& model, const TrainingExample& example, DiffusionState start,
               const ScheduleSet& s, Rng& rng);

/// Chain k uses stream ("sampling", k) of `seed`.
std::vector<Design> sample(const nn::DenoiserModel& model, const TrainingExample& example, const ScheduleSet& s,
                           std::size_t count, std::uint64_t seed);

/// Noises the native region t steps and denoises it back; t = T is de novo sampling.
std::vector<Design> optimize_antibody(const nn::DenoiserModel& model, const TrainingExample& example,
                                      const ScheduleSet& s, std::size_t t, std::size_t count,
                                      std::uint64_t seed);

/// Writes a final state into the example's complex and maps it back to Angstrom.
ComplexInstance apply_design(const TrainingExample& example, const DiffusionState& state);

}  // namespace cdrdiff::diff
