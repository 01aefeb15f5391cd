#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cdrdiff/structure.hpp"
#include "synthetic.hpp"

using namespace cdrdiff;

namespace {

const std::string kLine = "ATOM      1  N   ALA H  95A     11.104   6.134  -6.504  1.00 20.00           N";

std::vector<AtomRecord> rounded(std::vector<AtomRecord> atoms) {
    for (auto& a : atoms)
        for (int d = 0; d < 3; ++d) a.position[d] = std::round(a.position[d] * 1000.0) / 1000.0;
    return atoms;
}

ChainSelection heavy_and_antigen() {
    ChainSelection c;
    c.heavy = 'H';
    c.antigen = {'A'};
    return c;
}

}  // namespace

TEST(Alphabet, LettersAndNames) {
    EXPECT_EQ(kAminoAcidLetters.size(), kNumAminoAcids);
    EXPECT_EQ(residue_one_letter(kGlycine), 'G');
    EXPECT_EQ(residue_three_letter(kGlycine), "GLY");
    EXPECT_EQ(residue_type_from_name("TRP"), amino_acid_index('W'));
    EXPECT_EQ(residue_type_from_name("MSE"), amino_acid_index('M'));
    EXPECT_FALSE(residue_type_from_name("HOH").has_value());
    for (int t = 0; t < static_cast<int>(kNumAminoAcids); ++t) {
        EXPECT_EQ(residue_type_from_name(residue_three_letter(t)), t);
        EXPECT_EQ(amino_acid_index(residue_one_letter(t)), t);
    }
    EXPECT_EQ(types_to_sequence(sequence_to_types("ACDEFGHIKLMNPQRSTVWY")), "ACDEFGHIKLMNPQRSTVWY");
    EXPECT_THROW(sequence_to_types("AXB"), StructureError);
}

TEST(Pdb, ParsesFixedColumns) {
    const auto s = parse_pdb(kLine + "\nEND\n");
    ASSERT_EQ(s.atoms.size(), 1u);
    const AtomRecord& a = s.atoms[0];
    EXPECT_EQ(a.serial, 1);
    EXPECT_EQ(a.name, "N");
    EXPECT_EQ(a.res_name, "ALA");
    EXPECT_EQ(a.chain, 'H');
    EXPECT_EQ(a.res_seq, 95);
    EXPECT_EQ(a.icode, 'A');
    EXPECT_EQ(a.position, geom::Vec3(11.104, 6.134, -6.504));
    EXPECT_EQ(a.occupancy, 1.0);
    EXPECT_EQ(a.b_factor, 20.0);
    EXPECT_EQ(a.element, "N");
}

TEST(Pdb, WriteParseWriteIsIdentity) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = make_stream(seed, "pdb");
        const auto atoms = rounded(testkit::synthetic_atoms(rng));
        const std::string text = write_pdb(atoms);
        const auto parsed = parse_pdb(text);
        EXPECT_EQ(parsed.atoms, atoms);
        EXPECT_EQ(write_pdb(parsed.atoms), text);
    }
}

TEST(Pdb, KeepsFirstAlternateLocation) {
    std::string a = kLine, b = kLine;
    a[16] = 'A';
    b[16] = 'B';
    b[31] = '9';
    const auto s = parse_pdb(a + "\n" + b + "\n");
    ASSERT_EQ(s.atoms.size(), 1u);
    EXPECT_EQ(s.atoms[0].alt_loc, 'A');
    EXPECT_EQ(s.dropped_altlocs, 1u);
}

TEST(Pdb, SkipsHetatmAndStopsAtModelEnd) {
    const std::string het = "HETATM    2 FE   HEM A 201      -1.000   2.500   3.250  0.50 10.00          FE";
    std::string second = kLine;
    second[25] = '6';
    const auto s = parse_pdb("REMARK test\n" + kLine + "\n" + het + "\nENDMDL\n" + second + "\n");
    EXPECT_EQ(s.atoms.size(), 1u);
    EXPECT_EQ(s.skipped_records, 1u);
}

TEST(Pdb, Errors) {
    std::string bad = kLine;
    bad.replace(30, 8, "  xx.xxx");
    try {
        parse_pdb("REMARK\n" + bad + "\n");
        FAIL();
    } catch (const StructureError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(parse_pdb(kLine.substr(0, 40) + "\n"), StructureError);
    EXPECT_THROW(parse_pdb("REMARK nothing\nEND\n"), StructureError);
    EXPECT_THROW(read_pdb_file("/nonexistent/file.pdb"), StructureError);

    AtomRecord a = parse_pdb(kLine).atoms[0];
    EXPECT_THROW(write_pdb(std::vector<AtomRecord>{}), StructureError);
    a.position.x() = NAN;
    EXPECT_THROW(write_pdb(std::vector<AtomRecord>{a}), StructureError);
    a.position.x() = 12345.0;
    EXPECT_THROW(write_pdb(std::vector<AtomRecord>{a}), StructureError);
}

TEST(Pdb, GroupsResiduesInFileOrder) {
    Rng rng = make_stream(3, "pdb");
    const auto atoms = testkit::synthetic_atoms(rng);
    const auto groups = group_residues(atoms);
    EXPECT_EQ(groups.size(), 23u + 10u);
    EXPECT_EQ(groups.front().chain, 'H');
    EXPECT_EQ(groups.front().number.seq, 88);
    EXPECT_EQ(groups.back().chain, 'A');
    std::size_t total = 0;
    for (const auto& g : groups) total += g.atoms.size();
    EXPECT_EQ(total, atoms.size());
}

TEST(ResidueNumbers, InsertionCodesSortAfterBase) {
    EXPECT_LT((ResidueNumber{100, ' '}), (ResidueNumber{100, 'A'}));
    EXPECT_LT((ResidueNumber{100, 'B'}), (ResidueNumber{101, ' '}));
    EXPECT_EQ(residue_number_string({100, 'A'}), "100A");
    EXPECT_EQ(residue_number_string({52, ' '}), "52");
}

TEST(Cdr, ChothiaRanges) {
    const auto& s = chothia_scheme();
    EXPECT_EQ(s.range(CdrTag::H3).first.seq, 95);
    EXPECT_EQ(s.range(CdrTag::H3).last.seq, 102);
    EXPECT_EQ(s.range(CdrTag::H1).first.seq, 26);
    EXPECT_EQ(s.range(CdrTag::L1).last.seq, 34);
    EXPECT_EQ(parse_cdr_tag("L2"), CdrTag::L2);
    EXPECT_EQ(cdr_tag_name(CdrTag::H2), "H2");
    EXPECT_THROW(parse_cdr_tag("H4"), StructureError);
    EXPECT_EQ(chain_type_of(CdrTag::L3), ChainType::Light);
}

TEST(Cdr, AnnotationIncludesInsertions) {
    std::vector<ResidueNumber> nums;
    for (int i = 1; i <= 94; ++i) nums.push_back({i, ' '});
    for (int i = 95; i <= 100; ++i) nums.push_back({i, ' '});
    nums.push_back({100, 'A'});
    nums.push_back({100, 'B'});
    for (int i = 101; i <= 113; ++i) nums.push_back({i, ' '});
    const auto ann = annotate_cdrs(nums, ChainType::Heavy);
    const auto [b, e] = ann.range(CdrTag::H3);
    EXPECT_EQ(nums[b].seq, 95);
    EXPECT_EQ(e - b, 10u);
    EXPECT_EQ(ann.range(CdrTag::H1).second - ann.range(CdrTag::H1).first, 7u);
    EXPECT_THROW(ann.range(CdrTag::L1), StructureError);
}

TEST(Cdr, AnnotationErrors) {
    std::vector<ResidueNumber> nums{{10, ' '}, {9, ' '}};
    EXPECT_THROW(annotate_cdrs(nums, ChainType::Heavy), StructureError);
    std::vector<ResidueNumber> shortc{{1, ' '}, {2, ' '}};
    EXPECT_THROW(annotate_cdrs(shortc, ChainType::Heavy), StructureError);
    std::vector<ResidueNumber> gap;
    for (int i = 1; i <= 94; ++i) gap.push_back({i, ' '});
    for (int i = 103; i <= 110; ++i) gap.push_back({i, ' '});
    EXPECT_THROW(annotate_cdrs(gap, ChainType::Heavy).range(CdrTag::H3), StructureError);
}

TEST(Instance, BuildsChainsFramesAndMask) {
    Rng rng = make_stream(4, "inst");
    const auto atoms = testkit::synthetic_atoms(rng);
    const ComplexInstance inst = build_instance(atoms, heavy_and_antigen(), CdrTag::H3);
    ASSERT_EQ(inst.residues.size(), 33u);
    EXPECT_EQ(inst.cdr_length(), 8u);
    EXPECT_EQ(inst.residues[inst.cdr_begin].number.seq, 95);
    EXPECT_EQ(inst.residues[inst.cdr_end - 1].number.seq, 102);
    EXPECT_EQ(inst.residues.front().role, ChainRole::Heavy);
    EXPECT_EQ(inst.residues.back().role, ChainRole::Antigen);
    for (std::size_t i = 0; i < inst.residues.size(); ++i) {
        const Residue& r = inst.residues[i];
        EXPECT_TRUE(geom::is_rotation(r.frame, 1e-10));
        EXPECT_EQ(r.cb_virtual, r.type == kGlycine);
        EXPECT_NEAR((r.ca - r.cb).norm(), 1.53, 0.05);
    }
    EXPECT_EQ(inst.residues[5].chain_pos, 5u);
}

TEST(Instance, DropsIncompleteResiduesAndPlacesMissingOxygen) {
    Rng rng = make_stream(5, "inst");
    auto atoms = testkit::synthetic_atoms(rng);
    // Remove CA of heavy residue 90 and O of residue 91.
    std::erase_if(atoms, [](const AtomRecord& a) {
        return a.chain == 'H' && ((a.res_seq == 90 && a.name == "CA") || (a.res_seq == 91 && a.name == "O"));
    });
    const ComplexInstance inst = build_instance(atoms, heavy_and_antigen(), CdrTag::H3);
    EXPECT_EQ(inst.dropped_residues, 1u);
    EXPECT_EQ(inst.residues.size(), 32u);
    const Residue& r91 = inst.residues[2];
    EXPECT_EQ(r91.number.seq, 91);
    EXPECT_NEAR((r91.o - r91.c).norm(), 1.231, 1e-9);
    EXPECT_EQ(inst.residues[2].chain_pos, 3u);
}

TEST(Instance, MissingChainAndRegionErrors) {
    Rng rng = make_stream(6, "inst");
    const auto atoms = testkit::synthetic_atoms(rng);
    ChainSelection c = heavy_and_antigen();
    c.light = 'L';
    EXPECT_THROW(build_instance(atoms, c, CdrTag::H3), StructureError);
    EXPECT_THROW(build_instance(atoms, heavy_and_antigen(), CdrTag::L3), StructureError);
    EXPECT_THROW(build_instance(atoms, heavy_and_antigen(), CdrTag::H1), StructureError);
}

TEST(Instance, AtomsRoundTripThroughPdb) {
    Rng rng = make_stream(7, "inst");
    const ComplexInstance inst = testkit::synthetic_complex(rng);
    const auto text = write_pdb(instance_atoms(inst));
    const ComplexInstance back = build_instance(parse_pdb(text).atoms, heavy_and_antigen(), CdrTag::H3);
    ASSERT_EQ(back.residues.size(), inst.residues.size());
    EXPECT_EQ(back.cdr_begin, inst.cdr_begin);
    for (std::size_t i = 0; i < inst.residues.size(); ++i) {
        EXPECT_EQ(back.residues[i].type, inst.residues[i].type);
        EXPECT_LT((back.residues[i].ca - inst.residues[i].ca).norm(), 1e-3);
        EXPECT_LT((back.residues[i].frame - inst.residues[i].frame).cwiseAbs().maxCoeff(), 2e-3);
    }
}

TEST(Instance, IdealBackboneMatchesFrame) {
    Rng rng = make_stream(8, "inst");
    ComplexInstance inst = testkit::synthetic_complex(rng);
    Residue r = inst.residues[3];
    const Residue original = r;
    place_ideal_backbone(r);
    EXPECT_LT((r.ca - original.ca).norm(), 1e-12);
    EXPECT_LT((geom::frame_from_backbone(r.n, r.ca, r.c) - original.frame).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR((r.n - r.ca).norm(), 1.458, 1e-10);
    refresh_residue_geometry(r);
    EXPECT_LT((r.frame - original.frame).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Manifest, ArrayAndLinesWithDefaults) {
    const auto base = std::filesystem::path("/data/root");
    const auto a = parse_manifest(R"([{"pdb": "x.pdb", "heavy": "H", "antigen": ["A", "B"]},
                                      {"pdb": "/abs/y.pdb", "heavy": "H", "light": "L", "antigen": "C",
                                       "cdr": "L3", "split": "test", "id": "why"}])",
                                  base);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].pdb, base / "x.pdb");
    EXPECT_EQ(a[0].cdr, CdrTag::H3);
    EXPECT_EQ(a[0].split, "train");
    EXPECT_EQ(a[0].id, "x_H3");
    EXPECT_EQ(a[0].chains.antigen, (std::vector<char>{'A', 'B'}));
    EXPECT_FALSE(a[0].chains.light.has_value());
    EXPECT_EQ(a[1].pdb, "/abs/y.pdb");
    EXPECT_EQ(a[1].chains.light, 'L');
    EXPECT_EQ(a[1].id, "why");

    const auto b = parse_manifest("{\"pdb\": \"x.pdb\", \"heavy\": \"H\"}\n\n{\"pdb\": \"z.pdb\", \"heavy\": \"K\"}\n",
                                  base);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[1].chains.heavy, 'K');
}

TEST(Manifest, Errors) {
    EXPECT_THROW(parse_manifest("", "."), StructureError);
    EXPECT_THROW(parse_manifest("[]", "."), StructureError);
    EXPECT_THROW(parse_manifest("[{\"pdb\": \"x.pdb\", \"heavy\": \"HH\"}]", "."), StructureError);
    EXPECT_THROW(parse_manifest("[{\"pdb\": \"x.pdb\", \"heavy\": \"H\", \"split\": \"dev\"}]", "."),
                 StructureError);
    EXPECT_THROW(parse_manifest("{not json", "."), StructureError);
    EXPECT_THROW(load_manifest("/nonexistent/manifest.json"), StructureError);
}

TEST(Manifest, LoadsShippedToyManifest) {
    const auto entries = load_manifest(std::filesystem::path(CDRDIFF_DATA_DIR) / "manifest.json");
    ASSERT_EQ(entries.size(), 2u);
    for (const auto& e : entries) {
        const auto atoms = read_pdb_file(e.pdb).atoms;
        EXPECT_EQ(build_instance(atoms, e.chains, e.cdr).cdr_length(), 8u);
    }
}
