#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "cdrdiff/diffusion.hpp"
#include "cdrdiff/features.hpp"
#include "synthetic.hpp"

using namespace cdrdiff;
using namespace cdrdiff::feat;

namespace {

constexpr double kPi = std::numbers::pi;

ComplexInstance normalized(const ComplexInstance& inst) {
    return diff::normalize_coords(inst, diff::normalization_transform(inst));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

geom::Mat3 axis_rotation(int axis, double angle) {
    geom::Vec3 v = geom::Vec3::Zero();
    v[axis] = angle;
    return geom::rotation_exp(v);
}

}  // namespace

TEST(Features, InvariantUnderRigidMotion) {
    FeatureConfig config;
    config.knn = 8;
    for (std::uint64_t trial = 0; trial < 6; ++trial) {
        Rng rng = make_stream(31, "features", trial);
        const ComplexInstance base = testkit::synthetic_complex(rng);
        const testkit::RigidMotion motion = testkit::random_motion(rng);
        const ComplexInstance moved = testkit::transformed(base, motion);

        const ResidueGeometry ga = geometry_from_instance(normalized(base));
        const ResidueGeometry gb = geometry_from_instance(normalized(moved));

        EXPECT_LT(max_abs_diff(single_geometric_inputs(ga, config), single_geometric_inputs(gb, config)), 1e-9);

        const PairList pa = knn_pairs(ga, config.knn);
        const PairList pb = knn_pairs(gb, config.knn);
        ASSERT_EQ(pa.i, pb.i);
        ASSERT_EQ(pa.j, pb.j);
        const PairInputs ia = pair_inputs(ga, pa, config);
        const PairInputs ib = pair_inputs(gb, pb, config);
        EXPECT_LT(max_abs_diff(ia.geometric, ib.geometric), 1e-9);
        EXPECT_EQ(ia.type_pair, ib.type_pair);
        EXPECT_EQ(ia.separation, ib.separation);

        const AtomGraph aa = build_atom_graph(ga, config);
        const AtomGraph ab = build_atom_graph(gb, config);
        ASSERT_EQ(aa.dst, ab.dst);
        ASSERT_EQ(aa.src, ab.src);
        EXPECT_LT(max_abs_diff(aa.rbf, ab.rbf), 1e-9);
        EXPECT_LT(max_abs_diff(aa.envelope, ab.envelope), 1e-9);
        for (std::size_t e = 0; e < aa.edge_count(); ++e) {
            const geom::Vec3 da(aa.directions.at(e, 0), aa.directions.at(e, 1), aa.directions.at(e, 2));
            const geom::Vec3 db(ab.directions.at(e, 0), ab.directions.at(e, 1), ab.directions.at(e, 2));
            EXPECT_LT((motion.rotation * da - db).norm(), 1e-9);
        }
    }
}

TEST(Features, SingleInputsLayout) {
    Rng rng = make_stream(32, "features");
    const ComplexInstance inst = normalized(testkit::synthetic_complex(rng));
    const ResidueGeometry g = geometry_from_instance(inst);
    FeatureConfig config;
    const Tensor x = single_geometric_inputs(g, config);
    ASSERT_EQ(x.rows(), g.size());
    ASSERT_EQ(x.cols(), kSingleGeometricWidth);
    const auto& ideal = geom::ideal_residue();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const geom::Vec3 local_n(x.at(i, 0), x.at(i, 1), x.at(i, 2));
        EXPECT_NEAR(local_n.norm(), ideal.n.norm(), 0.05);
        EXPECT_NEAR(x.at(i, 3), (g.c[i] - g.ca[i]).norm() * config.length_scale, 1e-9);
        EXPECT_NEAR(x.at(i, 4), 0.0, 1e-9);
        EXPECT_NEAR(x.at(i, 5), 0.0, 1e-9);
        double hot = 0.0;
        for (std::size_t f = 0; f < kFragmentCount; ++f) hot += x.at(i, 18 + f);
        EXPECT_EQ(hot, 1.0);
        const int expected = inst.in_cdr(i) ? kFragmentCdr
                             : inst.residues[i].role == ChainRole::Heavy ? kFragmentHeavy
                                                                          : kFragmentAntigen;
        EXPECT_EQ(x.at(i, 18 + static_cast<std::size_t>(expected)), 1.0);
    }
}

TEST(Features, DihedralEncoding) {
    Rng rng = make_stream(33, "features");
    const ComplexInstance inst = normalized(testkit::synthetic_complex(rng));
    const ResidueGeometry g = geometry_from_instance(inst);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto enc = dihedral_encoding(g, i, diff::kLengthScale);
        const bool chain_start = i == 0 || g.chains[i - 1] != g.chains[i];
        const bool chain_end = i + 1 == g.size() || g.chains[i + 1] != g.chains[i];
        EXPECT_EQ(enc[4], chain_start ? 0.0 : 1.0) << i;
        EXPECT_EQ(enc[5], chain_end ? 0.0 : 1.0) << i;
        if (enc[4] == 1.0) {
            EXPECT_NEAR(enc[0] * enc[0] + enc[1] * enc[1], 1.0, 1e-12);
            const double phi = geom::dihedral(g.c[i - 1], g.n[i], g.ca[i], g.c[i]);
            EXPECT_NEAR(std::atan2(enc[0], enc[1]), phi, 1e-12);
        } else {
            EXPECT_EQ(enc[0], 0.0);
            EXPECT_EQ(enc[1], 0.0);
        }
        if (enc[5] == 0.0) {
            EXPECT_EQ(enc[2], 0.0);
            EXPECT_EQ(enc[3], 0.0);
        }
    }
}

TEST(Features, KnnPairsAreSymmetricWithSelfPairs) {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        Rng rng = make_stream(34, "features", trial);
        const ResidueGeometry g = geometry_from_instance(normalized(testkit::synthetic_complex(rng)));
        const std::size_t k = 3 + trial * 2;
        const PairList pairs = knn_pairs(g, k);
        std::set<std::pair<std::size_t, std::size_t>> set;
        for (std::size_t p = 0; p < pairs.size(); ++p) set.insert({pairs.i[p], pairs.j[p]});
        EXPECT_EQ(set.size(), pairs.size());
        for (std::size_t p = 1; p < pairs.size(); ++p) {
            EXPECT_LT(std::make_pair(pairs.i[p - 1], pairs.j[p - 1]), std::make_pair(pairs.i[p], pairs.j[p]));
        }
        for (const auto& [a, b] : set) EXPECT_TRUE(set.count({b, a}));
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_TRUE(set.count({i, i}));
            std::vector<std::pair<double, std::size_t>> d;
            for (std::size_t j = 0; j < g.size(); ++j)
                if (j != i) d.push_back({(g.ca[i] - g.ca[j]).norm(), j});
            std::sort(d.begin(), d.end());
            for (std::size_t q = 0; q < k; ++q) EXPECT_TRUE(set.count({i, d[q].second}));
        }
    }
}

TEST(Features, KnnCoveringAllResiduesGivesFullGraph) {
    Rng rng = make_stream(35, "features");
    const ResidueGeometry g = geometry_from_instance(normalized(testkit::synthetic_complex(rng)));
    const PairList pairs = knn_pairs(g, g.size());
    EXPECT_EQ(pairs.size(), g.size() * g.size());
}

TEST(Features, SeparationBuckets) {
    ResidueGeometry g;
    g.chains = {'H', 'H', 'H', 'A'};
    g.chain_pos = {0, 5, 60, 0};
    EXPECT_EQ(sequence_separation(g, 0, 1), 5);
    EXPECT_EQ(sequence_separation(g, 1, 0), -5);
    EXPECT_EQ(separation_bucket(g, 0, 0, 32), 32u);
    EXPECT_EQ(separation_bucket(g, 0, 1, 32), 37u);
    EXPECT_EQ(separation_bucket(g, 1, 0, 32), 27u);
    EXPECT_EQ(separation_bucket(g, 0, 2, 32), 64u);
    EXPECT_EQ(separation_bucket(g, 2, 0, 32), 0u);
    EXPECT_EQ(separation_bucket(g, 0, 3, 32), 65u);
    EXPECT_EQ(separation_bucket(g, 3, 2, 32), 65u);
    FeatureConfig config;
    EXPECT_EQ(config.separation_buckets(), 66u);
}

TEST(Features, RelativeOrientation) {
    const auto id = relative_orientation(geom::Mat3::Identity(), geom::Mat3::Identity());
    const std::array<double, kRelativeOrientationWidth> expected_id = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0};
    for (std::size_t k = 0; k < id.size(); ++k) EXPECT_NEAR(id[k], expected_id[k], 1e-12);

    const auto rx = relative_orientation(geom::Mat3::Identity(), axis_rotation(0, 0.7));
    EXPECT_NEAR(rx[9], std::sin(0.7), 1e-12);
    EXPECT_NEAR(rx[10], std::cos(0.7), 1e-12);
    EXPECT_NEAR(rx[11], 0.0, 1e-12);
    EXPECT_NEAR(rx[12], 1.0, 1e-12);

    const auto ry = relative_orientation(geom::Mat3::Identity(), axis_rotation(1, 1.3));
    EXPECT_NEAR(ry[11], 1.0, 1e-12);
    EXPECT_NEAR(ry[12], 0.0, 1e-12);

    Rng rng = make_stream(36, "features");
    for (int trial = 0; trial < 20; ++trial) {
        const geom::Mat3 a = geom::random_rotation(rng);
        const geom::Mat3 b = geom::random_rotation(rng);
        const geom::Mat3 q = geom::random_rotation(rng);
        const auto r1 = relative_orientation(a, b);
        const auto r2 = relative_orientation(q * a, q * b);
        for (std::size_t k = 0; k < r1.size(); ++k) EXPECT_NEAR(r1[k], r2[k], 1e-9);
    }
}

TEST(Features, PairInputsSelfRowsAndDistanceEncoding) {
    Rng rng = make_stream(37, "features");
    const ResidueGeometry g = geometry_from_instance(normalized(testkit::synthetic_complex(rng)));
    FeatureConfig config;
    const PairList pairs = knn_pairs(g, 6);
    const PairInputs in = pair_inputs(g, pairs, config);
    ASSERT_EQ(in.geometric.cols(), config.pair_geometric_width());
    const auto grid = geom::RbfGrid::uniform(config.pair_rbf, 0.0, config.pair_rbf_max);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const std::size_t i = pairs.i[p], j = pairs.j[p];
        const double d = (g.ca[i] - g.ca[j]).norm() * config.length_scale;
        if (d <= config.pair_rbf_max) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < config.pair_rbf; ++k)
                if (in.geometric.at(p, k) > in.geometric.at(p, best)) best = k;
            std::size_t nearest = 0;
            for (std::size_t k = 1; k < config.pair_rbf; ++k)
                if (std::abs(grid.centers[k] - d) < std::abs(grid.centers[nearest] - d)) nearest = k;
            EXPECT_EQ(best, nearest);
        }
        EXPECT_EQ(in.type_pair[p], static_cast<std::size_t>(g.types[i]) * kNumAminoAcids +
                                       static_cast<std::size_t>(g.types[j]));
        if (i == j) {
            EXPECT_NEAR(in.geometric.at(p, 0), 1.0, 1e-12);
            const double* rel = in.geometric.data() + p * in.geometric.cols() + config.pair_rbf;
            EXPECT_EQ(rel[0], 1.0);
            EXPECT_EQ(rel[4], 1.0);
            EXPECT_EQ(rel[8], 1.0);
            EXPECT_EQ(rel[10], 1.0);
            EXPECT_EQ(rel[9], 0.0);
            EXPECT_EQ(in.separation[p], static_cast<std::size_t>(config.max_separation));
        }
    }
}

TEST(Features, AtomGraphEdges) {
    Rng rng = make_stream(38, "features");
    const ResidueGeometry g = geometry_from_instance(normalized(testkit::synthetic_complex(rng)));
    FeatureConfig config;
    const AtomGraph graph = build_atom_graph(g, config);
    ASSERT_EQ(graph.atom_count(), g.size() * kAtomsPerResidue);
    ASSERT_GT(graph.edge_count(), 0u);
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t e = 0; e < graph.edge_count(); ++e) edges.insert({graph.dst[e], graph.src[e]});
    EXPECT_EQ(edges.size(), graph.edge_count());
    const auto grid = geom::RbfGrid::uniform(config.atom_rbf, 0.0, config.atom_cutoff);
    for (std::size_t e = 0; e < graph.edge_count(); ++e) {
        const std::size_t a = graph.dst[e], b = graph.src[e];
        EXPECT_NE(a, b);
        EXPECT_TRUE(edges.count({b, a}));
        const geom::Vec3 r = graph.positions[b] - graph.positions[a];
        EXPECT_NEAR(r.norm(), graph.distance[e], 1e-12);
        const double d = graph.distance[e] * config.length_scale;
        EXPECT_LE(d, config.atom_cutoff + 1e-12);
        const geom::Vec3 u(graph.directions.at(e, 0), graph.directions.at(e, 1), graph.directions.at(e, 2));
        EXPECT_LT((u - r.normalized()).norm(), 1e-12);
        EXPECT_NEAR(graph.envelope[e], 0.5 * (std::cos(kPi * d / config.atom_cutoff) + 1.0), 1e-12);
        std::size_t best = 0, nearest = 0;
        for (std::size_t k = 1; k < config.atom_rbf; ++k) {
            if (graph.rbf.at(e, k) > graph.rbf.at(e, best)) best = k;
            if (std::abs(grid.centers[k] - d) < std::abs(grid.centers[nearest] - d)) nearest = k;
        }
        EXPECT_EQ(best, nearest);
    }
    std::size_t brute = 0;
    for (std::size_t a = 0; a < graph.atom_count(); ++a)
        for (std::size_t b = 0; b < graph.atom_count(); ++b)
            if (a != b && (graph.positions[a] - graph.positions[b]).norm() * config.length_scale <= config.atom_cutoff)
                ++brute;
    EXPECT_EQ(brute, graph.edge_count());
    for (std::size_t r = 0; r < g.size(); ++r) {
        EXPECT_EQ(graph.kind[r * kAtomsPerResidue + kAtomCA], static_cast<std::size_t>(kAtomCA));
        const std::size_t cb = graph.kind[r * kAtomsPerResidue + 4];
        EXPECT_EQ(cb, g.cb_virtual[r] ? static_cast<std::size_t>(kAtomCBVirtual) : static_cast<std::size_t>(kAtomCB));
    }
}

TEST(Features, TimeEmbedding) {
    const Tensor zero = time_embedding(0, 100, 8);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(zero[k], 0.0);
        EXPECT_EQ(zero[4 + k], 1.0);
    }
    const Tensor e = time_embedding(37, 100, 8);
    for (std::size_t k = 0; k < 4; ++k) {
        const double freq = std::pow(100.0, -static_cast<double>(k) / 4.0);
        EXPECT_NEAR(e[k], std::sin(37.0 * freq), 1e-12);
        EXPECT_NEAR(e[4 + k], std::cos(37.0 * freq), 1e-12);
    }
    const Tensor a = time_embedding(10, 100, 8);
    const Tensor b = time_embedding(11, 100, 8);
    EXPECT_GT(max_abs_diff(a, b), 1e-3);
    EXPECT_THROW(time_embedding(1, 100, 7), std::invalid_argument);
    EXPECT_THROW(time_embedding(1, 0, 8), std::invalid_argument);
}

TEST(Features, CropContextKeepsNearestContext) {
    Rng rng = make_stream(39, "features");
    const ComplexInstance inst = testkit::synthetic_complex(rng);
    const std::size_t budget = inst.cdr_length() + 10;
    const ComplexInstance cropped = crop_context(inst, budget);
    ASSERT_EQ(cropped.residues.size(), budget);
    ASSERT_EQ(cropped.cdr_length(), inst.cdr_length());
    for (std::size_t j = 0; j < inst.cdr_length(); ++j) {
        EXPECT_EQ(cropped.residues[cropped.cdr_begin + j].ca, inst.residues[inst.cdr_begin + j].ca);
    }
    auto nearest = [&](const geom::Vec3& p) {
        double best = 1e300;
        for (std::size_t j = inst.cdr_begin; j < inst.cdr_end; ++j) best = std::min(best, (p - inst.residues[j].ca).norm());
        return best;
    };
    double worst_kept = 0.0;
    std::set<std::pair<char, std::size_t>> kept;
    for (std::size_t i = 0; i < cropped.residues.size(); ++i) {
        kept.insert({cropped.residues[i].chain, cropped.residues[i].chain_pos});
        if (!cropped.in_cdr(i)) worst_kept = std::max(worst_kept, nearest(cropped.residues[i].ca));
        if (i > 0 && cropped.residues[i].chain == cropped.residues[i - 1].chain) {
            EXPECT_LT(cropped.residues[i - 1].chain_pos, cropped.residues[i].chain_pos);
        }
    }
    for (const auto& r : inst.residues) {
        if (!kept.count({r.chain, r.chain_pos})) EXPECT_GE(nearest(r.ca), worst_kept);
    }
    EXPECT_EQ(crop_context(inst, inst.residues.size()).residues.size(), inst.residues.size());
    EXPECT_THROW(crop_context(inst, inst.cdr_length() - 1), std::invalid_argument);
}

TEST(Features, GeometryAtCleanStateMatchesInstance) {
    Rng rng = make_stream(40, "features");
    const ComplexInstance inst = normalized(testkit::synthetic_complex(rng));
    const DiffusionState clean = diff::clean_state(inst);
    const ResidueGeometry g = geometry_at_state(inst, clean, diff::kLengthScale);
    const ResidueGeometry ref = geometry_from_instance(inst);
    const auto& ideal = geom::ideal_residue();
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(g.types[i], ref.types[i]);
        EXPECT_LT((g.ca[i] - ref.ca[i]).norm(), 1e-12);
        EXPECT_LT((g.frames[i] - ref.frames[i]).norm(), 1e-12);
        if (inst.in_cdr(i)) {
            EXPECT_NEAR((g.n[i] - g.ca[i]).norm() * diff::kLengthScale, ideal.n.norm(), 1e-9);
            EXPECT_LT((g.n[i] - ref.n[i]).norm() * diff::kLengthScale, 0.1);
        } else {
            EXPECT_EQ(g.n[i], ref.n[i]);
        }
    }
    DiffusionState wrong = clean;
    wrong.types.pop_back();
    EXPECT_THROW(geometry_at_state(inst, wrong, diff::kLengthScale), std::invalid_argument);
}
