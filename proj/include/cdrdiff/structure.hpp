/**
 * PDB parsing and writing, CDR annotation and model-facing complex instances.
 */

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cdrdiff/geometry.hpp"

namespace cdrdiff {

class StructureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kNumAminoAcids = 20;
/// One-letter codes in type-index order.
inline constexpr std::string_view kAminoAcidLetters = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr int kGlycine = 5;

std::optional<int> amino_acid_index(char one_letter);
/// Canonical three-letter code or a known modified residue mapped to its parent.
std::optional<int> residue_type_from_name(std::string_view three_letter);
std::string_view residue_three_letter(int type);
char residue_one_letter(int type);
std::vector<int> sequence_to_types(std::string_view one_letter);
std::string types_to_sequence(std::span<const int> types);

struct AtomRecord {
    int serial = 0;
    std::string name;
    char alt_loc = ' ';
    std::string res_name;
    char chain = 'A';
    int res_seq = 0;
    char icode = ' ';
    geom::Vec3 position = geom::Vec3::Zero();
    double occupancy = 1.0;
    double b_factor = 0.0;
    std::string element;

    friend bool operator==(const AtomRecord&, const AtomRecord&) = default;
};

struct ParsedStructure {
    std::vector<AtomRecord> atoms;
    /// HETATM and other coordinate records that were not consumed.
    std::size_t skipped_records = 0;
    /// Alternate-location duplicates dropped in favour of the first occurrence.
    std::size_t dropped_altlocs = 0;
};

/// Reads ATOM records in file order. Parsing stops at the first END or ENDMDL.
ParsedStructure parse_pdb(std::string_view text);
ParsedStructure read_pdb_file(const std::filesystem::path& path);

/// Fixed-column ATOM lines followed by END.
std::string write_pdb(std::span<const AtomRecord> atoms);

/// Residue key used for ordering: insertion codes sort after their base number.
struct ResidueNumber {
    int seq = 0;
    char icode = ' ';

    friend auto operator<=>(const ResidueNumber&, const ResidueNumber&) = default;
};

std::string residue_number_string(const ResidueNumber& n);

/// Atoms of one residue, contiguous in file order.
struct ResidueRecords {
    char chain = 'A';
    ResidueNumber number;
    std::string res_name;
    std::vector<std::size_t> atoms;
};

std::vector<ResidueRecords> group_residues(std::span<const AtomRecord> atoms);

enum class CdrTag { H1, H2, H3, L1, L2, L3 };
enum class ChainType { Heavy, Light };

std::string_view cdr_tag_name(CdrTag tag);
CdrTag parse_cdr_tag(std::string_view name);
ChainType chain_type_of(CdrTag tag);

struct CdrRange {
    CdrTag tag;
    ResidueNumber first;
    ResidueNumber last;
};

/// Numbering ranges per CDR; inclusive at both ends.
struct CdrScheme {
    std::string name;
    std::vector<CdrRange> ranges;

    const CdrRange& range(CdrTag tag) const;
};

const CdrScheme& chothia_scheme();

/// Positional [begin, end) index ranges of the CDRs found on one chain.
struct CdrAnnotation {
    std::string scheme;
    ChainType chain_type = ChainType::Heavy;
    std::vector<std::pair<CdrTag, std::pair<std::size_t, std::size_t>>> ranges;

    std::pair<std::size_t, std::size_t> range(CdrTag tag) const;
};

/// `numbering` lists the chain's residues in order.
CdrAnnotation annotate_cdrs(std::span<const ResidueNumber> numbering, ChainType type,
                            const CdrScheme& scheme = chothia_scheme());

enum class ChainRole { Antigen, Heavy, Light };

struct Residue {
    int type = 0;
    char chain = 'A';
    ResidueNumber number;
    /// Position within its chain among the residues read from the file.
    std::size_t chain_pos = 0;
    ChainRole role = ChainRole::Antigen;
    geom::Vec3 n = geom::Vec3::Zero();
    geom::Vec3 ca = geom::Vec3::Zero();
    geom::Vec3 c = geom::Vec3::Zero();
    geom::Vec3 o = geom::Vec3::Zero();
    geom::Vec3 cb = geom::Vec3::Zero();
    /// Cb built from ideal geometry (always for glycine).
    bool cb_virtual = false;
    geom::Mat3 frame = geom::Mat3::Identity();
};

struct ComplexInstance {
    std::string id;
    std::vector<Residue> residues;
    CdrTag cdr = CdrTag::H3;
    /// Generated residues are [cdr_begin, cdr_end).
    std::size_t cdr_begin = 0;
    std::size_t cdr_end = 0;
    std::size_t dropped_residues = 0;

    std::size_t cdr_length() const { return cdr_end - cdr_begin; }
    bool in_cdr(std::size_t i) const { return i >= cdr_begin && i < cdr_end; }
};

struct ChainSelection {
    char heavy = 'H';
    std::optional<char> light;
    std::vector<char> antigen;
};

/// Residues of the selected chains (heavy, light, then antigen chains), with
/// frames, virtual Cb where needed and the mask of `cdr`.
ComplexInstance build_instance(std::span<const AtomRecord> atoms, const ChainSelection& chains, CdrTag cdr,
                               const CdrScheme& scheme = chothia_scheme());

/// ATOM records for every residue of an instance (N, CA, C, O and a real Cb).
std::vector<AtomRecord> instance_atoms(const ComplexInstance& instance);

/// Recomputes frame and Cb from the backbone of a residue.
void refresh_residue_geometry(Residue& residue);
/// Places N, C, O (and Cb) from the Ca position and frame using ideal geometry.
void place_ideal_backbone(Residue& residue);

struct ManifestEntry {
    std::filesystem::path pdb;
    ChainSelection chains;
    CdrTag cdr = CdrTag::H3;
    std::string split = "train";
    std::string id;
};

/// JSON array or one JSON object per line. Relative paths resolve against
/// the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

}  // namespace cdrdiff
