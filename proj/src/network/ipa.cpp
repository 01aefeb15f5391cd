#include <cmath>

#include "cdrdiff/network.hpp"

namespace cdrdiff::nn {

namespace {

Tensor frames_tensor(const std::vector<geom::Mat3>& frames) {
    Tensor out = Tensor::matrix(frames.size(), 9);
    for (std::size_t i = 0; i < frames.size(); ++i) geom::write_row_major(frames[i], out.data() + 9 * i);
    return out;
}

/// [3n, width] with row 3i + d filled by origins[i][d].
Tensor origin_rows(const std::vector<geom::Vec3>& origins, std::size_t width, double sign) {
    Tensor out = Tensor::matrix(3 * origins.size(), width);
    for (std::size_t i = 0; i < origins.size(); ++i)
        for (std::size_t d = 0; d < 3; ++d)
            for (std::size_t c = 0; c < width; ++c) out[(3 * i + d) * width + c] = sign * origins[i][d];
    return out;
}

/// Local points [n, 3 * width] to global vector layout [3n, width].
ad::Var to_global(const ad::Var& local, const Tensor& frames, const std::vector<geom::Vec3>& origins,
                  std::size_t width) {
    const ad::Var pts = ad::reshape(local, {3 * origins.size(), width});
    return ad::add_const(ad::rotate_vec(pts, frames), origin_rows(origins, width, 1.0));
}

}  // namespace

ad::Var DenoiserModel::ipa_block(ad::Graph& g, const ad::Var& s, const ad::Var& z, const Tensor& frames,
                                 const std::vector<geom::Vec3>& origins, const feat::PairList& pairs,
                                 const IpaParams& p) const {
    const std::size_t n = origins.size();
    const std::size_t heads = config_.ipa_heads;
    const std::size_t c = config_.ipa_head_dim;
    const std::size_t qp = config_.ipa_query_points;
    const std::size_t vp = config_.ipa_value_points;
    const auto pi = ad::make_index(pairs.i);
    const auto pj = ad::make_index(pairs.j);

    // Scalar attention term.
    const ad::Var q = ad::gather_rows(apply(g, p.q, s), pi);
    const ad::Var k = ad::gather_rows(apply(g, p.k, s), pj);
    const ad::Var qk = ad::scale(ad::group_sum(ad::mul(q, k), heads), 1.0 / std::sqrt(static_cast<double>(c)));

    // Point attention term on globally placed query/key points.
    const ad::Var qpts = to_global(apply(g, p.q_points, s), frames, origins, heads * qp);
    const ad::Var kpts = to_global(apply(g, p.k_points, s), frames, origins, heads * qp);
    const ad::Var diff = ad::sub(ad::gather_rows(qpts, pi, 3), ad::gather_rows(kpts, pj, 3));
    const ad::Var dist = ad::group_sum(ad::vec_dot(diff, diff), heads);
    const double w_c = std::sqrt(2.0 / (9.0 * static_cast<double>(qp)));
    const ad::Var point_term = ad::scale(ad::mul_row(dist, ad::exp(g.param(p.point_weight))), -0.5 * w_c);

    const ad::Var bias = apply(g, p.pair_bias, z);
    const ad::Var logits = ad::scale(ad::add(ad::add(qk, bias), point_term), std::sqrt(1.0 / 3.0));
    const ad::Var attn = ad::segment_softmax(logits, pi, n);

    // Attention-weighted scalar values.
    const ad::Var vals = ad::gather_rows(apply(g, p.v, s), pj);
    const ad::Var o_scalar = ad::scatter_add_rows(ad::mul(vals, ad::expand_groups(attn, c)), pi, n);

    // Attention-weighted pair features.
    const ad::Var zr = apply(g, p.pair_out, z);
    std::vector<ad::Var> tiles(heads, zr);
    const ad::Var o_pair = ad::scatter_add_rows(ad::mul_groups(ad::concat_cols(tiles), attn), pi, n);

    // Attention-weighted value points, mapped back into each residue's frame.
    const ad::Var vpts = to_global(apply(g, p.v_points, s), frames, origins, heads * vp);
    const ad::Var weighted = ad::vec_scale(ad::gather_rows(vpts, pj, 3), ad::expand_groups(attn, vp));
    const ad::Var summed = ad::scatter_add_rows(weighted, pi, n, 3);
    const ad::Var local =
        ad::rotate_vec(ad::add_const(summed, origin_rows(origins, heads * vp, -1.0)), frames, true);
    const ad::Var norms = ad::sqrt_eps(ad::vec_dot(local, local), 1e-8);
    const ad::Var local_flat = ad::reshape(local, {n, 3 * heads * vp});

    const ad::Var update = apply(g, p.out, ad::concat_cols({o_scalar, o_pair, local_flat, norms}));
    const ad::Var s1 = ad::layer_norm_rows(ad::add(s, update));
    return ad::layer_norm_rows(ad::add(s1, apply(g, p.transition, s1)));
}

ad::Var DenoiserModel::ipa_fuse(ad::Graph& g, const ad::Var& e, const ad::Var& z, const AtomState& atoms,
                                const feat::AtomGraph& graph, const feat::ResidueGeometry& geo,
                                const feat::PairList& pairs) const {
    const std::size_t n = geo.size();
    std::vector<std::size_t> owned(n, 0);
    for (std::size_t r : graph.owner) ++owned.at(r);
    for (std::size_t r = 0; r < n; ++r) {
        if (owned[r] == 0) throw std::invalid_argument("residue " + std::to_string(r) + " owns no atoms");
    }
    Tensor inv_count = Tensor::matrix(n, 1);
    for (std::size_t r = 0; r < n; ++r) inv_count[r] = 1.0 / static_cast<double>(owned[r]);
    const ad::Var inv = g.constant(inv_count);
    const auto owner = ad::make_index(graph.owner);

    // Atom scalars pooled per residue; atom vectors pooled in the residue frame.
    std::vector<geom::Mat3> atom_frames(graph.atom_count());
    for (std::size_t a = 0; a < graph.atom_count(); ++a) atom_frames[a] = geo.frames[graph.owner[a]];
    const ad::Var pooled_h = ad::mul_groups(ad::scatter_add_rows(atoms.h, owner, n), inv);
    const ad::Var v_local = ad::rotate_vec(atoms.v, frames_tensor(atom_frames), true);
    const ad::Var pooled_v = ad::reshape(ad::scatter_add_rows(v_local, owner, n, 3), {n, 3 * config_.atom_dim});
    const ad::Var pooled_v_mean = ad::mul_groups(pooled_v, inv);

    ad::Var s = apply(g, fuse_in_, ad::concat_cols({e, pooled_h, pooled_v_mean}));
    const Tensor frames = frames_tensor(geo.frames);
    for (const auto& p : ipa_) s = ipa_block(g, s, z, frames, geo.ca, pairs, p);
    return s;
}

}  // namespace cdrdiff::nn
