#include <cmath>

#include "cdrdiff/diffusion.hpp"
#include "cdrdiff/igso3.hpp"

namespace cdrdiff::diff {

namespace {

constexpr double kUniform = 1.0 / static_cast<double>(kNumAminoAcids);

void check_type(int s) {
    if (s < 0 || s >= static_cast<int>(kNumAminoAcids)) throw DiffusionError("amino-acid type out of range");
}

}  // namespace

TypeDistribution type_marginal(int s0, double alpha_bar) {
    check_type(s0);
    TypeDistribution p;
    p.fill((1.0 - alpha_bar) * kUniform);
    p[static_cast<std::size_t>(s0)] += alpha_bar;
    return p;
}

TypeDistribution type_step(int s_prev, double beta) {
    check_type(s_prev);
    TypeDistribution p;
    p.fill(beta * kUniform);
    p[static_cast<std::size_t>(s_prev)] += 1.0 - beta;
    return p;
}

int sample_type(const TypeDistribution& p, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u < acc) return static_cast<int>(k);
    }
    for (std::size_t k = p.size(); k-- > 0;) {
        if (p[k] > 0.0) return static_cast<int>(k);
    }
    return 0;
}

int forward_type(int s0, std::size_t t, const ScheduleSet& s, Rng& rng) {
    check_timestep(t, s);
    return sample_type(type_marginal(s0, s.type.alpha_bar[t]), rng);
}

int type_transition(int s_prev, std::size_t t, const ScheduleSet& s, Rng& rng) {
    check_timestep(t, s);
    return sample_type(type_step(s_prev, s.type.beta[t]), rng);
}

TypeDistribution type_posterior(int st, int s0, std::size_t t, const ScheduleSet& s) {
    check_timestep(t, s);
    check_type(st);
    const TypeDistribution prior = type_marginal(s0, s.type.alpha_bar[t - 1]);
    const double beta = s.type.beta[t];
    TypeDistribution post;
    double total = 0.0;
    for (std::size_t k = 0; k < kNumAminoAcids; ++k) {
        const double like = (static_cast<int>(k) == st ? 1.0 - beta : 0.0) + beta * kUniform;
        post[k] = like * prior[k];
        total += post[k];
    }
    for (double& p : post) p /= total;
    return post;
}

PositionSample forward_position(const geom::Vec3& x0, std::size_t t, const ScheduleSet& s, Rng& rng) {
    check_timestep(t, s);
    const double ab = s.pos.alpha_bar[t];
    PositionSample out;
    out.eps = geom::Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    out.xt = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * out.eps;
    return out;
}

geom::Vec3 position_transition(const geom::Vec3& x_prev, std::size_t t, const ScheduleSet& s, Rng& rng) {
    check_timestep(t, s);
    const double b = s.pos.beta[t];
    const geom::Vec3 noise(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    return std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * noise;
}

geom::Mat3 forward_orientation(const geom::Mat3& o0, std::size_t t, const ScheduleSet& s, Rng& rng) {
    check_timestep(t, s);
    const double ab = s.ori.alpha_bar[t];
    return geom::igso3_sample(geom::scale_rotation(o0, std::sqrt(ab)), 1.0 - ab, rng);
}

NoisedState noise_state(const DiffusionState& clean, std::size_t t, const ScheduleSet& s, Rng& rng) {
    check_timestep(t, s);
    NoisedState out;
    out.state.t = t;
    for (std::size_t j = 0; j < clean.size(); ++j) {
        out.state.types.push_back(forward_type(clean.types[j], t, s, rng));
        const auto pos = forward_position(clean.positions[j], t, s, rng);
        out.state.positions.push_back(pos.xt);
        out.eps.push_back(pos.eps);
        out.state.orientations.push_back(forward_orientation(clean.orientations[j], t, s, rng));
    }
    return out;
}

geom::Vec3 position_reverse_mean(const geom::Vec3& xt, const geom::Vec3& eps_hat, std::size_t t,
                                 const ScheduleSet& s) {
    check_timestep(t, s);
    const double b = s.pos.beta[t];
    const double ab = s.pos.alpha_bar[t];
    return (xt - (b / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(1.0 - b);
}

}  // namespace cdrdiff::diff
