#include <memory>

#include "cdrdiff/network.hpp"

namespace cdrdiff::nn {

namespace {

ad::Index index_of(const std::vector<std::size_t>& rows) { return ad::make_index(rows); }

}  // namespace

AtomState DenoiserModel::atom_embedding(ad::Graph& g, const feat::AtomGraph& graph) const {
    const std::size_t atoms = graph.atom_count();
    for (std::size_t kind : graph.kind) {
        if (kind >= feat::kAtomVocabulary) throw std::out_of_range("unknown atom vocabulary index");
    }
    const auto kinds = index_of(graph.kind);
    const auto dst = index_of(graph.dst);
    std::vector<std::size_t> src_kind(graph.edge_count());
    for (std::size_t e = 0; e < graph.edge_count(); ++e) src_kind[e] = graph.kind[graph.src[e]];

    const ad::Var rbf = g.constant(graph.rbf);
    const ad::Var env = g.constant(graph.envelope);
    const ad::Var self = apply(g, atom_embed_.kind, kinds);
    ad::Var neighbor = ad::mul(apply(g, atom_embed_.neighbor_kind, ad::make_index(src_kind)),
                               apply(g, atom_embed_.neighbor_rbf, rbf));
    neighbor = ad::mul_groups(neighbor, env);
    neighbor = ad::scale(ad::scatter_add_rows(neighbor, dst, atoms), 1.0 / config_.message_norm);

    AtomState s;
    s.h = apply(g, atom_embed_.combine, ad::concat_cols({self, neighbor}));
    s.f = apply(g, atom_embed_.edge, rbf);
    const ad::Var weights = ad::mul_groups(apply(g, atom_embed_.vector, rbf), env);
    s.v = ad::scale(ad::scatter_add_rows(ad::dir_outer(graph.directions, weights), dst, atoms, 3),
                    1.0 / config_.message_norm);
    return s;
}

AtomState DenoiserModel::vismp_block(ad::Graph& g, const AtomState& s, const feat::AtomGraph& graph,
                                     std::size_t layer) const {
    const VismpParams& p = vismp_.at(layer);
    const std::size_t atoms = graph.atom_count();
    const auto dst = index_of(graph.dst);
    const auto src = index_of(graph.src);
    const double inv_norm = 1.0 / config_.message_norm;
    const ad::Var env = g.constant(graph.envelope);

    // Scalar messages, linear parts computed per atom and gathered per edge.
    const ad::Var hn = ad::layer_norm_rows(s.h);
    ad::Var m_edge = ad::add(ad::gather_rows(apply(g, p.msg_self, hn), dst),
                             ad::gather_rows(apply(g, p.msg_neighbor, hn), src));
    m_edge = ad::mul_groups(ad::silu(ad::add(m_edge, apply(g, p.msg_edge, s.f))), env);
    const ad::Var m_atom = ad::scale(ad::scatter_add_rows(m_edge, dst, atoms), inv_norm);

    // Vector messages: direction term plus gated neighbour vectors.
    const ad::Var dir_term = ad::dir_outer(graph.directions, apply(g, p.vec_dir, m_edge));
    const ad::Var nbr_term = ad::vec_scale(ad::gather_rows(s.v, src, 3), apply(g, p.vec_neighbor, m_edge));
    const ad::Var vm_atom = ad::scale(ad::scatter_add_rows(ad::add(dir_term, nbr_term), dst, atoms, 3), inv_norm);

    // Scalar update from messages and channel-wise vector inner products.
    const ad::Var inner = ad::vec_dot(apply(g, p.inner_u, s.v), apply(g, p.inner_w, s.v));
    AtomState out;
    out.h = ad::add(s.h, apply(g, p.scalar_update, ad::concat_cols({hn, m_atom, inner})));

    // Edge update from the rejections of both end vectors.
    out.f = s.f;
    if (p.updates_edges) {
        const ad::Var ti = ad::reject(ad::gather_rows(apply(g, p.reject_t, s.v), dst, 3), graph.directions);
        const ad::Var sj = ad::reject(ad::gather_rows(apply(g, p.reject_s, s.v), src, 3), graph.directions);
        const ad::Var edge_inner = ad::vec_dot(ti, sj);
        out.f = ad::add(s.f, ad::silu(apply(g, p.edge_update, ad::concat_cols({s.f, edge_inner}))));
    }

    // Vector update.
    const ad::Var gated = ad::vec_scale(apply(g, p.vec_self, s.v), apply(g, p.vec_gate, m_atom));
    out.v = ad::add(s.v, ad::add(gated, apply(g, p.vec_message, vm_atom)));
    return out;
}

AtomState DenoiserModel::atom_encoder(ad::Graph& g, const feat::AtomGraph& graph) const {
    AtomState s = atom_embedding(g, graph);
    for (std::size_t l = 0; l < vismp_.size(); ++l) s = vismp_block(g, s, graph, l);
    return s;
}

}  // namespace cdrdiff::nn
