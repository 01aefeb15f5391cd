#include <cmath>

#include "cdrdiff/training.hpp"

namespace cdrdiff::diff {

LossBreakdown LossTerms::values() const {
    return {type.value()[0], pos.value()[0], ori.value()[0], total.value()[0]};
}

ad::Var loss_type(const ad::Var& probs, std::span<const TypeDistribution> target) {
    const std::size_t m = target.size();
    if (probs.rows() != m || probs.cols() != kNumAminoAcids) throw DiffusionError("loss_type: shape mismatch");
    Tensor q = Tensor::matrix(m, kNumAminoAcids);
    Tensor log_q = Tensor::matrix(m, kNumAminoAcids);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < kNumAminoAcids; ++k) {
            q.at(j, k) = target[j][k];
            log_q.at(j, k) = std::log(std::max(target[j][k], kProbabilityFloor));
        }
    }
    const ad::Var log_ratio = ad::add_const(ad::scale(ad::log_clamped(probs, kProbabilityFloor), -1.0), log_q);
    return ad::scale(ad::sum_all(ad::mul_const(log_ratio, q)), 1.0 / static_cast<double>(m));
}

ad::Var loss_pos(const ad::Var& eps_hat, std::span<const geom::Vec3> eps) {
    const std::size_t m = eps.size();
    if (eps_hat.rows() != m || eps_hat.cols() != 3) throw DiffusionError("loss_pos: shape mismatch");
    Tensor target = Tensor::matrix(m, 3);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t d = 0; d < 3; ++d) target.at(j, d) = -eps[j][static_cast<int>(d)];
    return ad::scale(ad::sum_all(ad::square(ad::add_const(eps_hat, target))), 1.0 / static_cast<double>(m));
}

ad::Var loss_ori(const std::array<ad::Var, 3>& axes, std::span<const geom::Mat3> o0) {
    const std::size_t m = o0.size();
    ad::Var sum;
    for (std::size_t c = 0; c < 3; ++c) {
        if (axes[c].rows() != 3 * m || axes[c].cols() != 1) throw DiffusionError("loss_ori: shape mismatch");
        Tensor target = Tensor::matrix(3 * m, 1);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t d = 0; d < 3; ++d)
                target.at(3 * j + d, 0) = -o0[j](static_cast<int>(d), static_cast<int>(c));
        const ad::Var term = ad::sum_all(ad::square(ad::add_const(axes[c], target)));
        sum = sum.valid() ? ad::add(sum, term) : term;
    }
    return ad::scale(sum, 1.0 / static_cast<double>(m));
}

double kl_divergence(const TypeDistribution& p, const TypeDistribution& q) {
    double kl = 0.0;
    for (std::size_t k = 0; k < kNumAminoAcids; ++k) {
        if (p[k] == 0.0) continue;
        kl += p[k] * (std::log(std::max(p[k], kProbabilityFloor)) - std::log(std::max(q[k], kProbabilityFloor)));
    }
    return kl;
}

double loss_type_value(std::span<const TypeDistribution> target, std::span<const TypeDistribution> predicted) {
    if (target.size() != predicted.size() || target.empty()) throw DiffusionError("loss_type: size mismatch");
    double sum = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) sum += kl_divergence(target[j], predicted[j]);
    return sum / static_cast<double>(target.size());
}

double loss_pos_value(std::span<const geom::Vec3> eps, std::span<const geom::Vec3> eps_hat) {
    if (eps.size() != eps_hat.size() || eps.empty()) throw DiffusionError("loss_pos: size mismatch");
    double sum = 0.0;
    for (std::size_t j = 0; j < eps.size(); ++j) sum += (eps[j] - eps_hat[j]).squaredNorm();
    return sum / static_cast<double>(eps.size());
}

double loss_ori_value(std::span<const geom::Mat3> o0, std::span<const geom::Mat3> o_hat) {
    if (o0.size() != o_hat.size() || o0.empty()) throw DiffusionError("loss_ori: size mismatch");
    double sum = 0.0;
    for (std::size_t j = 0; j < o0.size(); ++j)
        sum += (o0[j].transpose() * o_hat[j] - geom::Mat3::Identity()).squaredNorm();
    return sum / static_cast<double>(o0.size());
}

std::vector<TypeDistribution> posterior_targets(const DiffusionState& noisy, const DiffusionState& clean,
                                                const ScheduleSet& s) {
    if (noisy.size() != clean.size()) throw DiffusionError("posterior_targets: size mismatch");
    std::vector<TypeDistribution> out;
    out.reserve(noisy.size());
    for (std::size_t j = 0; j < noisy.size(); ++j)
        out.push_back(type_posterior(noisy.types[j], clean.types[j], noisy.t, s));
    return out;
}

TrainingExample make_example(const ComplexInstance& instance, std::optional<std::size_t> max_residues,
                             double length_scale) {
    TrainingExample ex;
    ex.id = instance.id;
    ex.source = instance;
    ex.transform = normalization_transform(instance, length_scale);
    const ComplexInstance cropped = max_residues ? feat::crop_context(instance, *max_residues) : instance;
    ex.normalized = normalize_coords(cropped, ex.transform);
    ex.clean = clean_state(ex.normalized);
    return ex;
}

LossTerms denoising_loss(ad::Graph& g, const nn::DenoiserModel& model, const TrainingExample& example,
                         std::size_t t, const ScheduleSet& s, Rng& rng) {
    const NoisedState noised = noise_state(example.clean, t, s, rng);
    const nn::DenoiseOutput out = model.forward(g, example.normalized, noised.state, s);
    LossTerms terms;
    terms.type = loss_type(out.probs, posterior_targets(noised.state, example.clean, s));
    terms.pos = loss_pos(out.eps, noised.eps);
    terms.ori = loss_ori(out.axes, example.clean.orientations);
    terms.total = ad::add(ad::add(terms.type, terms.pos), terms.ori);
    return terms;
}

LossBreakdown total_loss(const nn::DenoiserModel& model, const TrainingExample& example, std::size_t t,
                         const ScheduleSet& s, Rng& rng) {
    ad::Graph g(&model.params(), false);
    return denoising_loss(g, model, example, t, s, rng).values();
}

}  // namespace cdrdiff::diff
