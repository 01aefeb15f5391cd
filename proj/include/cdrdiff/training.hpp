/**
 * Denoising losses, training examples and the optimizer loop.
 */

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdrdiff/diffusion.hpp"
#include "cdrdiff/network.hpp"
#include "cdrdiff/optimizer.hpp"

namespace cdrdiff::diff {

inline constexpr double kProbabilityFloor = 1e-10;

struct LossBreakdown {
    double type = 0.0;
    double pos = 0.0;
    double ori = 0.0;
    double total = 0.0;
};

struct LossTerms {
    ad::Var type;
    ad::Var pos;
    ad::Var ori;
    ad::Var total;

    LossBreakdown values() const;
};

/// Mean over rows of KL(target || predicted), predicted floored before the log.
ad::Var loss_type(const ad::Var& probs, std::span<const TypeDistribution> target);
/// Mean over residues of the squared error of the noise prediction.
ad::Var loss_pos(const ad::Var& eps_hat, std::span<const geom::Vec3> eps);
/// Mean over residues of |O0^T O_hat - I|_F^2 given the columns of O_hat.
ad::Var loss_ori(const std::array<ad::Var, 3>& axes, std::span<const geom::Mat3> o0);

double kl_divergence(const TypeDistribution& p, const TypeDistribution& q);
double loss_type_value(std::span<const TypeDistribution> target, std::span<const TypeDistribution> predicted);
double loss_pos_value(std::span<const geom::Vec3> eps, std::span<const geom::Vec3> eps_hat);
double loss_ori_value(std::span<const geom::Mat3> o0, std::span<const geom::Mat3> o_hat);

/// q(s^{t-1} | s^t, s^0) for every generated residue.
std::vector<TypeDistribution> posterior_targets(const DiffusionState& noisy, const DiffusionState& clean,
                                                const ScheduleSet& s);

/// A complex prepared for the model: normalized, optionally cropped.
struct TrainingExample {
    std::string id;
    /// Full complex in Angstrom.
    ComplexInstance source;
    /// Cropped and normalized complex seen by the model.
    ComplexInstance normalized;
    CoordinateTransform transform;
    DiffusionState clean;
};

TrainingExample make_example(const ComplexInstance& instance, std::optional<std::size_t> max_residues = {},
                             double length_scale = kLengthScale);

/// Noises the clean state to step t, runs the model on `g` and builds the losses.
LossTerms denoising_loss(ad::Graph& g, const nn::DenoiserModel& model, const TrainingExample& example,
                         std::size_t t, const ScheduleSet& s, Rng& rng);
LossBreakdown total_loss(const nn::DenoiserModel& model, const TrainingExample& example, std::size_t t,
                         const ScheduleSet& s, Rng& rng);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    AdamConfig adam;
};

struct StepReport {
    std::size_t step = 0;
    LossBreakdown loss;
    double grad_norm = 0.0;
};

/// Step k draws its batch from stream ("data", k) and the noise of batch item b
/// from stream ("diffusion", k * batch_size + b), so a resumed run continues
/// exactly where a checkpoint left off.
class Trainer {
public:
    Trainer(nn::DenoiserModel& model, ScheduleSet schedules, TrainConfig config,
            std::vector<TrainingExample> examples);

    StepReport step();
    std::size_t steps_done() const { return step_; }
    const AdamState& adam() const { return adam_; }
    void resume(AdamState adam, std::size_t steps_done);

private:
    nn::DenoiserModel& model_;
    ScheduleSet schedules_;
    TrainConfig config_;
    std::vector<TrainingExample> examples_;
    AdamState adam_;
    std::size_t step_ = 0;
};

/// Timestep of batch item draws: uniform on [1, T].
std::size_t sample_timestep(const ScheduleSet& s, Rng& rng);

}  // namespace cdrdiff::diff
