#include <cmath>

#include "cdrdiff/network.hpp"

namespace cdrdiff::nn {

namespace {

Tensor repeat_rows(const Tensor& row, std::size_t n) {
    Tensor out = Tensor::matrix(n, row.cols());
    for (std::size_t i = 0; i < n; ++i) std::copy(row.values().begin(), row.values().end(), out.data() + i * row.cols());
    return out;
}

Tensor frames_of(const std::vector<geom::Mat3>& frames) {
    Tensor out = Tensor::matrix(frames.size(), 9);
    for (std::size_t i = 0; i < frames.size(); ++i) geom::write_row_major(frames[i], out.data() + 9 * i);
    return out;
}

/// Gram-Schmidt on per-residue vector pairs [3m, 1].
std::array<ad::Var, 3> orthonormalize(const ad::Var& a, const ad::Var& b) {
    const ad::Var e1 = ad::vec_scale(a, ad::reciprocal(ad::sqrt_eps(ad::vec_dot(a, a), 1e-12)));
    const ad::Var b_perp = ad::sub(b, ad::vec_scale(e1, ad::vec_dot(e1, b)));
    const ad::Var e2 = ad::vec_scale(b_perp, ad::reciprocal(ad::sqrt_eps(ad::vec_dot(b_perp, b_perp), 1e-12)));
    return {e1, e2, ad::vec_cross(e1, e2)};
}

}  // namespace

DenoiserModel::DenoiserModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    Rng rng = make_stream(seed, "init");
    const auto& fc = config_.features;
    const std::size_t k = config_.atom_dim;
    const std::size_t d = config_.hidden_dim;
    ParameterSet& ps = params_;

    type_embed_ = make_embedding(ps, rng, "res.type", kNumAminoAcids, config_.embed_dim);
    residue_mlp_ = make_mlp(ps, rng, "res.mlp", config_.embed_dim + feat::kSingleGeometricWidth + config_.time_dim,
                            config_.residue_dim, config_.residue_dim);
    pair_type_embed_ = make_embedding(ps, rng, "pair.type", kNumAminoAcids * kNumAminoAcids, config_.embed_dim);
    separation_embed_ = make_embedding(ps, rng, "pair.sep", fc.separation_buckets(), config_.embed_dim);
    pair_mlp_ = make_mlp(ps, rng, "pair.mlp", 2 * config_.embed_dim + fc.pair_geometric_width(), config_.pair_dim,
                         config_.pair_dim);

    atom_embed_.kind = make_embedding(ps, rng, "atom.kind", feat::kAtomVocabulary, k);
    atom_embed_.neighbor_kind = make_embedding(ps, rng, "atom.nbr_kind", feat::kAtomVocabulary, k);
    atom_embed_.neighbor_rbf = make_linear(ps, rng, "atom.nbr_rbf", fc.atom_rbf, k);
    atom_embed_.combine = make_linear(ps, rng, "atom.combine", 2 * k, k);
    atom_embed_.edge = make_linear(ps, rng, "atom.edge", fc.atom_rbf, k);
    atom_embed_.vector = make_linear(ps, rng, "atom.vec", fc.atom_rbf, k, false);

    for (std::size_t l = 0; l < config_.vismp_layers; ++l) {
        const std::string n = "vismp." + std::to_string(l);
        VismpParams p;
        p.msg_self = make_linear(ps, rng, n + ".msg_self", k, k, false);
        p.msg_neighbor = make_linear(ps, rng, n + ".msg_nbr", k, k, false);
        p.msg_edge = make_linear(ps, rng, n + ".msg_edge", k, k);
        p.vec_dir = make_linear(ps, rng, n + ".vec_dir", k, k);
        p.vec_neighbor = make_linear(ps, rng, n + ".vec_nbr", k, k);
        p.inner_u = make_linear(ps, rng, n + ".inner_u", k, k, false);
        p.inner_w = make_linear(ps, rng, n + ".inner_w", k, k, false);
        p.scalar_update = make_mlp(ps, rng, n + ".h_update", 3 * k, k, k, 0.5);
        p.updates_edges = l + 1 < config_.vismp_layers;
        if (p.updates_edges) {
            p.reject_t = make_linear(ps, rng, n + ".rej_t", k, k, false);
            p.reject_s = make_linear(ps, rng, n + ".rej_s", k, k, false);
            p.edge_update = make_linear(ps, rng, n + ".f_update", 2 * k, k, true, 0.5);
        }
        p.vec_self = make_linear(ps, rng, n + ".v_self", k, k, false);
        p.vec_gate = make_linear(ps, rng, n + ".v_gate", k, k, true, 0.5);
        p.vec_message = make_linear(ps, rng, n + ".v_msg", k, k, false, 0.5);
        vismp_.push_back(p);
    }

    fuse_in_ = make_linear(ps, rng, "fuse.in", config_.residue_dim + 4 * k, d);
    const std::size_t h = config_.ipa_heads;
    for (std::size_t l = 0; l < config_.ipa_layers; ++l) {
        const std::string n = "ipa." + std::to_string(l);
        IpaParams p;
        p.q = make_linear(ps, rng, n + ".q", d, h * config_.ipa_head_dim, false);
        p.k = make_linear(ps, rng, n + ".k", d, h * config_.ipa_head_dim, false);
        p.v = make_linear(ps, rng, n + ".v", d, h * config_.ipa_head_dim, false);
        p.q_points = make_linear(ps, rng, n + ".q_pts", d, 3 * h * config_.ipa_query_points);
        p.k_points = make_linear(ps, rng, n + ".k_pts", d, 3 * h * config_.ipa_query_points);
        p.v_points = make_linear(ps, rng, n + ".v_pts", d, 3 * h * config_.ipa_value_points);
        p.pair_bias = make_linear(ps, rng, n + ".pair_bias", config_.pair_dim, h, false);
        p.pair_out = make_linear(ps, rng, n + ".pair_out", config_.pair_dim, config_.ipa_pair_out, false);
        p.point_weight = ps.add(n + ".point_weight", Tensor({h}));
        const std::size_t out_in =
            h * config_.ipa_head_dim + h * config_.ipa_pair_out + 4 * h * config_.ipa_value_points;
        p.out = make_linear(ps, rng, n + ".out", out_in, d, true, 0.5);
        p.transition = make_mlp(ps, rng, n + ".transition", d, d, d, 0.5);
        ipa_.push_back(p);
    }

    const std::size_t head_in = d + config_.time_dim;
    type_head_ = make_mlp(ps, rng, "head.type", head_in, d, kNumAminoAcids);
    eps_local_ = make_linear(ps, rng, "head.eps_local", head_in, 3, true, 0.1);
    eps_vector_ = make_linear(ps, rng, "head.eps_vec", k, 1, false, 0.1);
    ori_local_ = make_linear(ps, rng, "head.ori_local", head_in, 6, true, 0.1);
    ori_vector_ = make_linear(ps, rng, "head.ori_vec", k, 2, false, 0.1);
    // Start the orientation head at the identity relative to the noisy frame.
    auto bias = ps.value(*ori_local_.bias).values();
    bias[0] = 1.0;
    bias[4] = 1.0;
}

ad::Var DenoiserModel::residue_single_features(ad::Graph& g, const feat::ResidueGeometry& geo,
                                               const Tensor& time_rows) const {
    std::vector<std::size_t> types(geo.types.begin(), geo.types.end());
    const ad::Var t = apply(g, type_embed_, ad::make_index(std::move(types)));
    const ad::Var inputs = g.constant(feat::single_geometric_inputs(geo, config_.features));
    return apply(g, residue_mlp_, ad::concat_cols({t, inputs, g.constant(time_rows)}));
}

ad::Var DenoiserModel::residue_pair_features(ad::Graph& g, const feat::ResidueGeometry& geo,
                                             const feat::PairList& pairs) const {
    auto inputs = feat::pair_inputs(geo, pairs, config_.features);
    const ad::Var tp = apply(g, pair_type_embed_, ad::make_index(std::move(inputs.type_pair)));
    const ad::Var sep = apply(g, separation_embed_, ad::make_index(std::move(inputs.separation)));
    return apply(g, pair_mlp_, ad::concat_cols({tp, sep, g.constant(std::move(inputs.geometric))}));
}

DenoiseOutput DenoiserModel::forward(ad::Graph& g, const ComplexInstance& normalized, const DiffusionState& state,
                                     const diff::ScheduleSet& schedules) const {
    diff::check_timestep(state.t, schedules);
    const auto& fc = config_.features;
    DenoiseOutput out;
    out.geometry = feat::geometry_at_state(normalized, state, fc.length_scale);
    const auto& geo = out.geometry;
    const std::size_t n = geo.size();
    const std::size_t m = geo.generated.size();
    const Tensor time_row = feat::time_embedding(state.t, schedules.steps, config_.time_dim);

    out.e = residue_single_features(g, geo, repeat_rows(time_row, n));
    out.pairs = feat::knn_pairs(geo, fc.knn);
    out.z = residue_pair_features(g, geo, out.pairs);
    out.graph = feat::build_atom_graph(geo, fc);
    out.atoms = atom_encoder(g, out.graph);
    out.residue_hidden = ipa_fuse(g, out.e, out.z, out.atoms, out.graph, geo, out.pairs);

    const ad::Var hidden = ad::gather_rows(out.residue_hidden, ad::make_index(geo.generated));
    const ad::Var head_in = ad::concat_cols({hidden, g.constant(repeat_rows(time_row, m))});
    std::vector<std::size_t> ca_atoms;
    for (std::size_t r : geo.generated) ca_atoms.push_back(r * feat::kAtomsPerResidue + feat::kAtomCA);
    const ad::Var v_ca = ad::gather_rows(out.atoms.v, ad::make_index(std::move(ca_atoms)), 3);
    const Tensor noisy_frames = frames_of(state.orientations);

    // Type head: posterior of the multinomial chain with the clean type replaced
    // by the predicted distribution.
    const std::size_t t = state.t;
    const double beta = schedules.type.beta[t];
    const double ab_prev = schedules.type.alpha_bar[t - 1];
    const double uniform = 1.0 / static_cast<double>(kNumAminoAcids);
    out.clean_probs = ad::softmax_rows(apply(g, type_head_, head_in));
    Tensor likelihood = Tensor::matrix(m, kNumAminoAcids, beta * uniform);
    for (std::size_t j = 0; j < m; ++j) likelihood.at(j, static_cast<std::size_t>(state.types[j])) += 1.0 - beta;
    const ad::Var mixed = ad::add_scalar(ad::scale(out.clean_probs, ab_prev), (1.0 - ab_prev) * uniform);
    const ad::Var unnorm = ad::mul_const(mixed, likelihood);
    out.probs = ad::mul_groups(unnorm, ad::reciprocal(ad::group_sum(unnorm, 1)));

    // Position head: frame-local prediction rotated by the noisy frame plus a
    // mix of the Ca vector channels.
    const ad::Var eps_local = ad::reshape(apply(g, eps_local_, head_in), {3 * m, 1});
    const ad::Var eps_global = ad::add(ad::rotate_vec(eps_local, noisy_frames), apply(g, eps_vector_, v_ca));
    out.eps = ad::reshape(eps_global, {m, 3});

    // Orientation head: two vectors built the same way, then Gram-Schmidt.
    const ad::Var ori = apply(g, ori_local_, head_in);
    const ad::Var ori_vec = apply(g, ori_vector_, v_ca);
    const ad::Var a = ad::add(ad::rotate_vec(ad::reshape(ad::slice_cols(ori, 0, 3), {3 * m, 1}), noisy_frames),
                              ad::slice_cols(ori_vec, 0, 1));
    const ad::Var b = ad::add(ad::rotate_vec(ad::reshape(ad::slice_cols(ori, 3, 6), {3 * m, 1}), noisy_frames),
                              ad::slice_cols(ori_vec, 1, 2));
    out.axes = orthonormalize(a, b);
    return out;
}

std::vector<geom::Mat3> rotations_from_axes(const std::array<ad::Var, 3>& axes) {
    const std::size_t m = axes[0].rows() / 3;
    std::vector<geom::Mat3> out(m);
    for (std::size_t j = 0; j < m; ++j)
        for (int c = 0; c < 3; ++c)
            for (int d = 0; d < 3; ++d) out[j](d, c) = axes[static_cast<std::size_t>(c)].value()[3 * j + static_cast<std::size_t>(d)];
    return out;
}

}  // namespace cdrdiff::nn
