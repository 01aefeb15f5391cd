#include <algorithm>
#include <cmath>

#include "cdrdiff/igso3.hpp"
#include "cdrdiff/sampling.hpp"

namespace cdrdiff::diff {

ReverseOutput reverse_step(const nn::DenoiserModel& model, const ComplexInstance& normalized,
                           const DiffusionState& state, const ScheduleSet& s, Rng& rng) {
    if (state.t == 0) throw DiffusionError("reverse_step: state is already at t = 0");
    check_timestep(state.t, s);
    const std::size_t t = state.t;
    ad::Graph g(&model.params(), false);
    const nn::DenoiseOutput out = model.forward(g, normalized, state, s);
    const std::vector<geom::Mat3> o_hat = nn::rotations_from_axes(out.axes);
    const Tensor& probs = out.probs.value();
    const Tensor& eps = out.eps.value();

    ReverseOutput next;
    next.state.t = t - 1;
    const std::size_t m = state.size();
    for (std::size_t j = 0; j < m; ++j) {
        TypeDistribution p;
        for (std::size_t k = 0; k < kNumAminoAcids; ++k) p[k] = probs.at(j, k);
        next.state.types.push_back(sample_type(p, rng));
        next.confidence.push_back(*std::max_element(p.begin(), p.end()));

        const geom::Vec3 eps_hat(eps.at(j, 0), eps.at(j, 1), eps.at(j, 2));
        geom::Vec3 x = position_reverse_mean(state.positions[j], eps_hat, t, s);
        geom::Mat3 o = o_hat[j];
        if (t > 1) {
            const double sigma = std::sqrt(s.pos.beta[t]);
            for (int d = 0; d < 3; ++d) x[d] += sigma * standard_normal(rng);
            o = geom::igso3_sample(o, s.ori.beta[t], rng);
        }
        next.state.positions.push_back(x);
        next.state.orientations.push_back(o);
    }
    return next;
}

DiffusionState prior_state(std::size_t m, const ScheduleSet& s, Rng& rng) {
    if (m == 0) throw DiffusionError("prior_state: empty region");
    DiffusionState st;
    st.t = s.steps;
    std::uniform_int_distribution<int> type(0, static_cast<int>(kNumAminoAcids) - 1);
    for (std::size_t j = 0; j < m; ++j) {
        st.types.push_back(type(rng));
        st.positions.emplace_back(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        st.orientations.push_back(geom::random_rotation(rng));
    }
    return st;
}

ComplexInstance apply_design(const TrainingExample& example, const DiffusionState& state) {
    ComplexInstance out = example.source;
    if (state.size() != out.cdr_length()) throw DiffusionError("apply_design: state does not match the region");
    for (std::size_t j = 0; j < state.size(); ++j) {
        Residue& r = out.residues[out.cdr_begin + j];
        r.type = state.types[j];
        r.ca = example.transform.invert(state.positions[j]);
        r.frame = state.orientations[j];
        place_ideal_backbone(r);
    }
    return out;
}

Design denoise(const nn::DenoiserModel& model, const TrainingExample& example, DiffusionState start,
               const ScheduleSet& s, Rng& rng) {
    Design d;
    d.state = std::move(start);
    while (d.state.t > 0) {
        ReverseOutput step = reverse_step(model, example.normalized, d.state, s, rng);
        d.state = std::move(step.state);
        d.confidence = std::move(step.confidence);
    }
    d.sequence = types_to_sequence(d.state.types);
    d.instance = apply_design(example, d.state);
    return d;
}

std::vector<Design> sample(const nn::DenoiserModel& model, const TrainingExample& example, const ScheduleSet& s,
                           std::size_t count, std::uint64_t seed) {
    std::vector<Design> out(count);
    const std::size_t m = example.clean.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t k = 0; k < count; ++k) {
        Rng rng = make_stream(seed, "sampling", k);
        out[k] = denoise(model, example, prior_state(m, s, rng), s, rng);
    }
    return out;
}

std::vector<Design> optimize_antibody(const nn::DenoiserModel& model, const TrainingExample& example,
                                      const ScheduleSet& s, std::size_t t, std::size_t count,
                                      std::uint64_t seed) {
    if (t == 0 || t > s.steps) throw DiffusionError("optimize_antibody: perturbation steps must lie in [1, T]");
    if (t == s.steps) return sample(model, example, s, count, seed);
    std::vector<Design> out(count);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t k = 0; k < count; ++k) {
        Rng rng = make_stream(seed, "sampling", k);
        out[k] = denoise(model, example, noise_state(example.clean, t, s, rng).state, s, rng);
    }
    return out;
}

}  // namespace cdrdiff::diff
