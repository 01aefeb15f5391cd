/**
 * Geometric inputs of the denoiser: per-residue and per-pair invariant
 * features, the sparse residue pair list and the heavy-atom graph.
 *
 * Everything here is a constant of the computation graph. Coordinates are
 * normalized (divided by the length scale); distance encodings work in
 * Angstrom.
 */

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cdrdiff/geometry.hpp"
#include "cdrdiff/state.hpp"
#include "cdrdiff/structure.hpp"
#include "cdrdiff/tensor.hpp"

namespace cdrdiff::feat {

enum AtomKind : std::size_t { kAtomN = 0, kAtomCA = 1, kAtomC = 2, kAtomO = 3, kAtomCB = 4, kAtomCBVirtual = 5 };
inline constexpr std::size_t kAtomVocabulary = 6;
inline constexpr std::size_t kAtomsPerResidue = 5;

enum Fragment : int { kFragmentAntigen = 0, kFragmentHeavy = 1, kFragmentLight = 2, kFragmentCdr = 3 };
inline constexpr std::size_t kFragmentCount = 4;

/// Columns of single_geometric_inputs: 12 local backbone offsets, 6 dihedral
/// terms, 4 fragment one-hot entries.
inline constexpr std::size_t kSingleGeometricWidth = 22;
/// Entries of relative_orientation.
inline constexpr std::size_t kRelativeOrientationWidth = 13;

struct FeatureConfig {
    /// Atom-graph cutoff in Angstrom.
    double atom_cutoff = 5.0;
    std::size_t knn = 32;
    std::size_t atom_rbf = 32;
    std::size_t pair_rbf = 64;
    double pair_rbf_max = 20.0;
    int max_separation = 32;
    double length_scale = 10.0;

    std::size_t separation_buckets() const { return static_cast<std::size_t>(2 * max_separation + 2); }
    std::size_t pair_geometric_width() const { return pair_rbf + kRelativeOrientationWidth; }
};

/// Per-residue coordinates at one diffusion state, normalized units.
struct ResidueGeometry {
    std::vector<int> types;
    std::vector<char> chains;
    std::vector<std::size_t> chain_pos;
    std::vector<int> fragments;
    std::vector<geom::Vec3> n, ca, c, o, cb;
    std::vector<bool> cb_virtual;
    std::vector<geom::Mat3> frames;
    /// Residue indices of the generated region, in order.
    std::vector<std::size_t> generated;

    std::size_t size() const { return types.size(); }
};

/// Geometry of the instance as stored (generated residues at their true state).
ResidueGeometry geometry_from_instance(const ComplexInstance& normalized);
/// Generated residues take the types, Ca positions and frames of `state`, with
/// backbone atoms placed from ideal local coordinates.
ResidueGeometry geometry_at_state(const ComplexInstance& normalized, const DiffusionState& state,
                                  double length_scale);

/// Keeps the generated residues and the context residues closest to them
/// (by Ca distance), preserving order. No-op when already small enough.
ComplexInstance crop_context(const ComplexInstance& instance, std::size_t max_residues);

/// [N, 22] rows of local backbone offsets, dihedral encodings and fragment type.
Tensor single_geometric_inputs(const ResidueGeometry& g, const FeatureConfig& config);

/// (sin phi, cos phi, sin psi, cos psi, phi valid, psi valid); (0, 0) and
/// validity 0 where a neighbour is missing.
std::array<double, 6> dihedral_encoding(const ResidueGeometry& g, std::size_t i, double length_scale);

/// Ordered (i, j) residue pairs: the k nearest by Ca distance for every i,
/// closed under reversal, always including (i, i). Sorted by (i, j).
struct PairList {
    std::vector<std::size_t> i;
    std::vector<std::size_t> j;

    std::size_t size() const { return i.size(); }
};

PairList knn_pairs(const ResidueGeometry& g, std::size_t k);

/// Signed sequence separation j - i on the same chain.
int sequence_separation(const ResidueGeometry& g, std::size_t i, std::size_t j);
/// Embedding bucket: clipped separation + max, or 2 max + 1 across chains.
std::size_t separation_bucket(const ResidueGeometry& g, std::size_t i, std::size_t j, int max_separation);

/// 9 entries of O_i^T O_j, then sin/cos of its rotation angle and sin/cos of
/// the azimuth of its axis in frame i (zero for angles below 1e-6).
std::array<double, kRelativeOrientationWidth> relative_orientation(const geom::Mat3& oi, const geom::Mat3& oj);

struct PairInputs {
    /// [P, pair_rbf + 13]: Ca distance encoding and relative orientation.
    Tensor geometric;
    std::vector<std::size_t> type_pair;
    std::vector<std::size_t> separation;
};

PairInputs pair_inputs(const ResidueGeometry& g, const PairList& pairs, const FeatureConfig& config);

/// Heavy-atom graph: five atoms per residue (N, CA, C, O, CB). Edge e points
/// from receiver dst[e] to neighbour src[e].
struct AtomGraph {
    std::vector<std::size_t> kind;
    std::vector<geom::Vec3> positions;
    std::vector<std::size_t> owner;
    std::vector<std::size_t> dst;
    std::vector<std::size_t> src;
    std::vector<double> distance;
    /// [E, 3] unit vectors from dst to src.
    Tensor directions;
    /// [E, atom_rbf] Gaussian encoding of the edge length in Angstrom.
    Tensor rbf;
    /// [E, 1] smooth cosine cutoff 0.5 (cos(pi d / r_cut) + 1).
    Tensor envelope;

    std::size_t atom_count() const { return kind.size(); }
    std::size_t edge_count() const { return dst.size(); }
};

AtomGraph build_atom_graph(const ResidueGeometry& g, const FeatureConfig& config);

/// Sinusoidal embedding of step t with frequencies T^(-k / half), k < half;
/// `dim` entries (sin then cos halves).
Tensor time_embedding(std::size_t t, std::size_t steps, std::size_t dim);

}  // namespace cdrdiff::feat
