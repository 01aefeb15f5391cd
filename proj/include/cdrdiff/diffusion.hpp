/**
 * Noise schedules, forward processes, the type posterior and coordinate
 * normalization.
 *
 * Timesteps run 1..T; index 0 of every schedule holds beta = 0 and
 * alpha_bar = 1.
 */

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "cdrdiff/geometry.hpp"
#include "cdrdiff/rng.hpp"
#include "cdrdiff/state.hpp"
#include "cdrdiff/structure.hpp"

namespace cdrdiff::diff {

using TypeDistribution = std::array<double, kNumAminoAcids>;

class DiffusionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Schedule {
    std::vector<double> beta;
    std::vector<double> alpha_bar;

    std::size_t steps() const { return beta.size() - 1; }
    double alpha(std::size_t t) const { return 1.0 - beta.at(t); }
};

/// Builds alpha_bar as the running product of (1 - beta). Every beta must lie
/// in (0, 1).
Schedule schedule_from_betas(std::span<const double> betas);
Schedule linear_schedule(std::size_t steps, double beta_first, double beta_last);
/// beta_t = lo + (hi - lo) * sigmoid(-6 + 12 (t - 1) / (T - 1)).
Schedule sigmoid_schedule(std::size_t steps, double lo, double hi);

struct ScheduleConfig {
    std::size_t steps = 100;
    double type_beta_min = 1e-4;
    double type_beta_max = 0.15;
    double pos_beta_first = 1e-4;
    double pos_beta_last = 0.1;
    double ori_beta_first = 1e-4;
    double ori_beta_last = 0.1;
};

struct ScheduleSet {
    std::size_t steps = 0;
    Schedule type;
    Schedule pos;
    Schedule ori;
};

ScheduleSet make_schedules(const ScheduleConfig& config);

void check_timestep(std::size_t t, const ScheduleSet& s);

/// q(s^t | s^0) of the closed-form multinomial marginal.
TypeDistribution type_marginal(int s0, double alpha_bar);
/// q(s^t | s^{t-1}) of one multinomial step.
TypeDistribution type_step(int s_prev, double beta);

int sample_type(const TypeDistribution& p, Rng& rng);

int forward_type(int s0, std::size_t t, const ScheduleSet& s, Rng& rng);
/// One step of the single-step chain: s^t from s^{t-1}.
int type_transition(int s_prev, std::size_t t, const ScheduleSet& s, Rng& rng);

/// q(s^{t-1} | s^t, s^0), normalized.
TypeDistribution type_posterior(int st, int s0, std::size_t t, const ScheduleSet& s);

struct PositionSample {
    geom::Vec3 xt;
    geom::Vec3 eps;
};

PositionSample forward_position(const geom::Vec3& x0, std::size_t t, const ScheduleSet& s, Rng& rng);
/// One step: x^t ~ N(sqrt(1 - beta_t) x^{t-1}, beta_t I).
geom::Vec3 position_transition(const geom::Vec3& x_prev, std::size_t t, const ScheduleSet& s, Rng& rng);

/// O^t ~ IGSO3(scale_rotation(O^0, sqrt(alpha_bar)), 1 - alpha_bar).
geom::Mat3 forward_orientation(const geom::Mat3& o0, std::size_t t, const ScheduleSet& s, Rng& rng);

/// Noises every generated residue of a clean state to step t.
struct NoisedState {
    DiffusionState state;
    std::vector<geom::Vec3> eps;
};
NoisedState noise_state(const DiffusionState& clean, std::size_t t, const ScheduleSet& s, Rng& rng);

/// Mean of the reverse position step given a noise prediction.
geom::Vec3 position_reverse_mean(const geom::Vec3& xt, const geom::Vec3& eps_hat, std::size_t t, const ScheduleSet& s);

/// Translation to the anchor centroid and a uniform length scale.
struct CoordinateTransform {
    geom::Vec3 center = geom::Vec3::Zero();
    double scale = 10.0;

    geom::Vec3 apply(const geom::Vec3& p) const { return (p - center) / scale; }
    geom::Vec3 invert(const geom::Vec3& p) const { return p * scale + center; }
};

inline constexpr double kLengthScale = 10.0;

/// Centre = mean Ca of the two residues flanking the CDR on its chain, or of
/// all context residues when either flank is missing.
CoordinateTransform normalization_transform(const ComplexInstance& instance, double scale = kLengthScale);
ComplexInstance normalize_coords(const ComplexInstance& instance, const CoordinateTransform& tr);
ComplexInstance denormalize_coords(const ComplexInstance& instance, const CoordinateTransform& tr);

/// Clean state of the generated residues of a normalized instance.
DiffusionState clean_state(const ComplexInstance& normalized);

}  // namespace cdrdiff::diff
