#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

#include "cdrdiff/features.hpp"

namespace cdrdiff::feat {

namespace {

int fragment_of(const Residue& r, bool generated) {
    if (generated) return kFragmentCdr;
    switch (r.role) {
        case ChainRole::Heavy:
            return kFragmentHeavy;
        case ChainRole::Light:
            return kFragmentLight;
        default:
            return kFragmentAntigen;
    }
}

bool peptide_bonded(const ResidueGeometry& g, std::size_t a, std::size_t b, double length_scale) {
    // Residue b directly follows residue a on the same chain.
    return g.chains[a] == g.chains[b] && g.chain_pos[a] + 1 == g.chain_pos[b] &&
           (g.c[a] - g.n[b]).norm() * length_scale < 2.0;
}

}  // namespace

ResidueGeometry geometry_from_instance(const ComplexInstance& normalized) {
    ResidueGeometry g;
    for (std::size_t i = 0; i < normalized.residues.size(); ++i) {
        const auto& r = normalized.residues[i];
        g.types.push_back(r.type);
        g.chains.push_back(r.chain);
        g.chain_pos.push_back(r.chain_pos);
        g.fragments.push_back(fragment_of(r, normalized.in_cdr(i)));
        g.n.push_back(r.n);
        g.ca.push_back(r.ca);
        g.c.push_back(r.c);
        g.o.push_back(r.o);
        g.cb.push_back(r.cb);
        g.cb_virtual.push_back(r.cb_virtual);
        g.frames.push_back(r.frame);
        if (normalized.in_cdr(i)) g.generated.push_back(i);
    }
    return g;
}

ResidueGeometry geometry_at_state(const ComplexInstance& normalized, const DiffusionState& state,
                                  double length_scale) {
    if (state.size() != normalized.cdr_length() || state.positions.size() != state.size() ||
        state.orientations.size() != state.size()) {
        throw std::invalid_argument("diffusion state does not match the generated region");
    }
    ResidueGeometry g = geometry_from_instance(normalized);
    const auto& ideal = geom::ideal_residue();
    const double inv = 1.0 / length_scale;
    for (std::size_t j = 0; j < state.size(); ++j) {
        const std::size_t i = normalized.cdr_begin + j;
        const geom::Mat3& frame = state.orientations[j];
        const geom::Vec3& x = state.positions[j];
        g.types[i] = state.types[j];
        g.ca[i] = x;
        g.frames[i] = frame;
        g.n[i] = x + inv * (frame * ideal.n);
        g.c[i] = x + inv * (frame * ideal.c);
        g.o[i] = x + inv * (frame * ideal.o);
        g.cb[i] = x + inv * (frame * ideal.cb);
        g.cb_virtual[i] = state.types[j] == kGlycine;
    }
    return g;
}

ComplexInstance crop_context(const ComplexInstance& instance, std::size_t max_residues) {
    const std::size_t n = instance.residues.size();
    if (n <= max_residues) return instance;
    if (max_residues < instance.cdr_length()) {
        throw std::invalid_argument("crop budget smaller than the generated region");
    }
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < n; ++i) {
        if (instance.in_cdr(i)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = instance.cdr_begin; j < instance.cdr_end; ++j) {
            best = std::min(best, (instance.residues[i].ca - instance.residues[j].ca).norm());
        }
        dist.push_back({best, i});
    }
    std::sort(dist.begin(), dist.end());
    std::vector<bool> keep(n, false);
    for (std::size_t i = instance.cdr_begin; i < instance.cdr_end; ++i) keep[i] = true;
    for (std::size_t k = 0; k < max_residues - instance.cdr_length(); ++k) keep[dist[k].second] = true;

    ComplexInstance out = instance;
    out.residues.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (i == instance.cdr_begin) out.cdr_begin = out.residues.size();
        if (keep[i]) out.residues.push_back(instance.residues[i]);
        if (i + 1 == instance.cdr_end) out.cdr_end = out.residues.size();
    }
    return out;
}

std::array<double, 6> dihedral_encoding(const ResidueGeometry& g, std::size_t i, double length_scale) {
    std::array<double, 6> out{};
    if (i > 0 && peptide_bonded(g, i - 1, i, length_scale)) {
        try {
            const double phi = geom::dihedral(g.c[i - 1], g.n[i], g.ca[i], g.c[i]);
            out[0] = std::sin(phi);
            out[1] = std::cos(phi);
            out[4] = 1.0;
        } catch (const geom::GeometryError&) {
        }
    }
    if (i + 1 < g.size() && peptide_bonded(g, i, i + 1, length_scale)) {
        try {
            const double psi = geom::dihedral(g.n[i], g.ca[i], g.c[i], g.n[i + 1]);
            out[2] = std::sin(psi);
            out[3] = std::cos(psi);
            out[5] = 1.0;
        } catch (const geom::GeometryError&) {
        }
    }
    return out;
}

Tensor single_geometric_inputs(const ResidueGeometry& g, const FeatureConfig& config) {
    Tensor out = Tensor::matrix(g.size(), kSingleGeometricWidth);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const geom::Mat3 rt = g.frames[i].transpose();
        const geom::Vec3 offsets[4] = {g.n[i], g.c[i], g.o[i], g.cb[i]};
        double* row = out.data() + i * kSingleGeometricWidth;
        for (int a = 0; a < 4; ++a) {
            const geom::Vec3 local = rt * (offsets[a] - g.ca[i]) * config.length_scale;
            for (int d = 0; d < 3; ++d) row[3 * a + d] = local[d];
        }
        const auto dih = dihedral_encoding(g, i, config.length_scale);
        std::copy(dih.begin(), dih.end(), row + 12);
        row[18 + g.fragments[i]] = 1.0;
    }
    return out;
}

PairList knn_pairs(const ResidueGeometry& g, std::size_t k) {
    const std::size_t n = g.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < n; ++i) {
        pairs.push_back({i, i});
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dist.push_back({(g.ca[i] - g.ca[j]).squaredNorm(), j});
        }
        const std::size_t take = std::min(k, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
        for (std::size_t q = 0; q < take; ++q) {
            pairs.push_back({i, dist[q].second});
            pairs.push_back({dist[q].second, i});
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    PairList out;
    for (const auto& [a, b] : pairs) {
        out.i.push_back(a);
        out.j.push_back(b);
    }
    return out;
}

int sequence_separation(const ResidueGeometry& g, std::size_t i, std::size_t j) {
    return static_cast<int>(g.chain_pos[j]) - static_cast<int>(g.chain_pos[i]);
}

std::size_t separation_bucket(const ResidueGeometry& g, std::size_t i, std::size_t j, int max_separation) {
    if (g.chains[i] != g.chains[j]) return static_cast<std::size_t>(2 * max_separation + 1);
    const int d = std::clamp(sequence_separation(g, i, j), -max_separation, max_separation);
    return static_cast<std::size_t>(d + max_separation);
}

std::array<double, kRelativeOrientationWidth> relative_orientation(const geom::Mat3& oi, const geom::Mat3& oj) {
    const geom::Mat3 r = oi.transpose() * oj;
    std::array<double, kRelativeOrientationWidth> out{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) out[static_cast<std::size_t>(3 * a + b)] = r(a, b);
    const auto aa = geom::rotation_log(r);
    out[9] = std::sin(aa.angle);
    out[10] = std::cos(aa.angle);
    if (aa.angle >= 1e-6) {
        const double az = std::atan2(aa.axis.y(), aa.axis.x());
        out[11] = std::sin(az);
        out[12] = std::cos(az);
    }
    return out;
}

PairInputs pair_inputs(const ResidueGeometry& g, const PairList& pairs, const FeatureConfig& config) {
    const auto grid = geom::RbfGrid::uniform(config.pair_rbf, 0.0, config.pair_rbf_max);
    const std::size_t width = config.pair_geometric_width();
    PairInputs out;
    out.geometric = Tensor::matrix(pairs.size(), width);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const std::size_t i = pairs.i[p], j = pairs.j[p];
        double* row = out.geometric.data() + p * width;
        const double d = (g.ca[i] - g.ca[j]).norm() * config.length_scale;
        geom::gaussian_rbf_encode(d, grid, std::span<double>(row, config.pair_rbf));
        std::array<double, kRelativeOrientationWidth> rel{};
        if (i == j) {
            rel = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0};
        } else {
            rel = relative_orientation(g.frames[i], g.frames[j]);
        }
        std::copy(rel.begin(), rel.end(), row + config.pair_rbf);
        out.type_pair.push_back(static_cast<std::size_t>(g.types[i]) * kNumAminoAcids +
                                static_cast<std::size_t>(g.types[j]));
        out.separation.push_back(separation_bucket(g, i, j, config.max_separation));
    }
    return out;
}

AtomGraph build_atom_graph(const ResidueGeometry& g, const FeatureConfig& config) {
    if (!(config.atom_cutoff > 0.0)) throw std::invalid_argument("atom cutoff must be positive");
    if (g.size() == 0) throw std::invalid_argument("atom graph needs at least one residue");
    AtomGraph graph;
    for (std::size_t r = 0; r < g.size(); ++r) {
        const geom::Vec3 atoms[kAtomsPerResidue] = {g.n[r], g.ca[r], g.c[r], g.o[r], g.cb[r]};
        for (std::size_t a = 0; a < kAtomsPerResidue; ++a) {
            std::size_t kind = a;
            if (a == kAtomCB && g.cb_virtual[r]) kind = kAtomCBVirtual;
            graph.kind.push_back(kind);
            graph.positions.push_back(atoms[a]);
            graph.owner.push_back(r);
        }
    }
    const double cutoff = config.atom_cutoff / config.length_scale;
    const std::size_t n = graph.atom_count();
    std::vector<double> dirs;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const geom::Vec3 r = graph.positions[j] - graph.positions[i];
            const double d = r.norm();
            if (d > cutoff || d < 1e-9) continue;
            graph.dst.push_back(i);
            graph.src.push_back(j);
            graph.distance.push_back(d);
            for (int k = 0; k < 3; ++k) dirs.push_back(r[k] / d);
        }
    }
    const std::size_t e = graph.edge_count();
    graph.directions = Tensor({e, 3}, std::move(dirs));
    graph.rbf = Tensor::matrix(e, config.atom_rbf);
    graph.envelope = Tensor::matrix(e, 1);
    const auto grid = geom::RbfGrid::uniform(config.atom_rbf, 0.0, config.atom_cutoff);
    for (std::size_t k = 0; k < e; ++k) {
        const double d = graph.distance[k] * config.length_scale;
        geom::gaussian_rbf_encode(d, grid, std::span<double>(graph.rbf.data() + k * config.atom_rbf, config.atom_rbf));
        graph.envelope[k] = 0.5 * (std::cos(std::numbers::pi * d / config.atom_cutoff) + 1.0);
    }
    return graph;
}

Tensor time_embedding(std::size_t t, std::size_t steps, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("time embedding width must be even and positive");
    if (steps == 0) throw std::invalid_argument("time embedding needs at least one step");
    Tensor out = Tensor::matrix(1, dim);
    const std::size_t half = dim / 2;
    const double x = static_cast<double>(t);
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(static_cast<double>(steps)) * static_cast<double>(k) /
                                     static_cast<double>(half));
        out[k] = std::sin(x * freq);
        out[half + k] = std::cos(x * freq);
    }
    return out;
}

}  // namespace cdrdiff::feat
