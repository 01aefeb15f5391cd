/**
 * The denoising network.
 *
 * Residue features e and pair features z come from learned encoders over the
 * invariant inputs of features.hpp. An atom encoder runs vector-scalar
 * message passing over the heavy-atom graph; invariant point attention fuses
 * both scales per residue; three heads produce the type distribution, the
 * position noise and the denoised orientation of every generated residue.
 *
 * Atom vector features use the vector layout of ops.hpp ([3A, K]).
 */

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cdrdiff/autodiff.hpp"
#include "cdrdiff/diffusion.hpp"
#include "cdrdiff/features.hpp"
#include "cdrdiff/layers.hpp"
#include "cdrdiff/state.hpp"
#include "cdrdiff/structure.hpp"

namespace cdrdiff::nn {

struct ModelConfig {
    feat::FeatureConfig features;
    std::size_t residue_dim = 128;
    std::size_t pair_dim = 128;
    std::size_t atom_dim = 64;
    std::size_t hidden_dim = 128;
    std::size_t embed_dim = 32;
    std::size_t time_dim = 16;
    std::size_t vismp_layers = 4;
    std::size_t ipa_layers = 2;
    std::size_t ipa_heads = 4;
    std::size_t ipa_head_dim = 16;
    std::size_t ipa_query_points = 4;
    std::size_t ipa_value_points = 8;
    std::size_t ipa_pair_out = 16;
    /// Divisor applied to summed atom messages.
    double message_norm = 16.0;
};

struct AtomState {
    ad::Var h;  ///< [A, K]
    ad::Var v;  ///< [3A, K]
    ad::Var f;  ///< [E, K]
};

struct VismpParams {
    Linear msg_self, msg_neighbor, msg_edge;
    Linear vec_dir, vec_neighbor;
    Linear inner_u, inner_w;
    Mlp scalar_update;
    /// Edge features feed only later layers, so the last layer has no edge update.
    bool updates_edges = true;
    Linear reject_t, reject_s;
    Linear edge_update;
    Linear vec_self, vec_gate, vec_message;
};

struct IpaParams {
    Linear q, k, v;
    Linear q_points, k_points, v_points;
    Linear pair_bias, pair_out;
    std::size_t point_weight = 0;
    Linear out;
    Mlp transition;
};

struct AtomEmbeddingParams {
    Embedding kind;
    Embedding neighbor_kind;
    Linear neighbor_rbf;
    Linear combine;
    Linear edge;
    /// Initial vector channels: enveloped sum of edge directions weighted by
    /// a projection of the edge encoding.
    Linear vector;
};

struct DenoiseOutput {
    /// [m, 20] rows of F.
    ad::Var probs;
    /// [m, 20] predicted clean-type distribution behind F.
    ad::Var clean_probs;
    /// [m, 3] predicted position noise, global normalized frame.
    ad::Var eps;
    /// Columns e1, e2, e3 of the predicted orientations, each [3m, 1].
    std::array<ad::Var, 3> axes;

    // Intermediate values exposed for inspection.
    ad::Var e;
    ad::Var z;
    AtomState atoms;
    ad::Var residue_hidden;
    feat::ResidueGeometry geometry;
    feat::PairList pairs;
    feat::AtomGraph graph;
};

/// Rotation matrices from the axis columns of a DenoiseOutput.
std::vector<geom::Mat3> rotations_from_axes(const std::array<ad::Var, 3>& axes);

class DenoiserModel {
public:
    DenoiserModel(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    /// `normalized` carries the context; generated residues take their state
    /// from `state`. The graph must be bound to params().
    DenoiseOutput forward(ad::Graph& g, const ComplexInstance& normalized, const DiffusionState& state,
                          const diff::ScheduleSet& schedules) const;

    ad::Var residue_single_features(ad::Graph& g, const feat::ResidueGeometry& geo, const Tensor& time_rows) const;
    ad::Var residue_pair_features(ad::Graph& g, const feat::ResidueGeometry& geo, const feat::PairList& pairs) const;
    AtomState atom_embedding(ad::Graph& g, const feat::AtomGraph& graph) const;
    AtomState vismp_block(ad::Graph& g, const AtomState& s, const feat::AtomGraph& graph, std::size_t layer) const;
    AtomState atom_encoder(ad::Graph& g, const feat::AtomGraph& graph) const;
    ad::Var ipa_fuse(ad::Graph& g, const ad::Var& e, const ad::Var& z, const AtomState& atoms,
                     const feat::AtomGraph& graph, const feat::ResidueGeometry& geo,
                     const feat::PairList& pairs) const;

private:
    ad::Var ipa_block(ad::Graph& g, const ad::Var& s, const ad::Var& z, const Tensor& frames,
                      const std::vector<geom::Vec3>& origins, const feat::PairList& pairs,
                      const IpaParams& p) const;

    ModelConfig config_;
    ParameterSet params_;

    Embedding type_embed_, pair_type_embed_, separation_embed_;
    Mlp residue_mlp_, pair_mlp_;
    AtomEmbeddingParams atom_embed_;
    std::vector<VismpParams> vismp_;
    Linear fuse_in_;
    std::vector<IpaParams> ipa_;
    Mlp type_head_;
    Linear eps_local_;
    Linear eps_vector_;
    Linear ori_local_;
    Linear ori_vector_;
};

}  // namespace cdrdiff::nn
