#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "cdrdiff/structure.hpp"

namespace cdrdiff {

namespace {

constexpr std::array<std::string_view, kNumAminoAcids> kThreeLetter = {
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU",
    "MET", "ASN", "PRO", "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR"};

// Modified or protonation-state residue names and their canonical parent.
constexpr std::array<std::pair<std::string_view, char>, 27> kModified = {{
    {"MSE", 'M'}, {"SEC", 'C'}, {"PYL", 'K'}, {"HYP", 'P'}, {"SEP", 'S'}, {"TPO", 'T'},
    {"PTR", 'Y'}, {"MLY", 'K'}, {"M3L", 'K'}, {"CSO", 'C'}, {"CSD", 'C'}, {"CME", 'C'},
    {"KCX", 'K'}, {"LLP", 'K'}, {"PCA", 'E'}, {"HIC", 'H'}, {"HID", 'H'}, {"HIE", 'H'},
    {"HIP", 'H'}, {"HSD", 'H'}, {"HSE", 'H'}, {"HSP", 'H'}, {"CYX", 'C'}, {"ASH", 'D'},
    {"GLH", 'E'}, {"LYN", 'K'}, {"NLE", 'L'},
}};

std::string_view trim(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
}

std::string_view column(std::string_view line, std::size_t first, std::size_t last) {
    // 1-based inclusive PDB columns, clipped to the line.
    if (line.size() < first) return {};
    return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
    throw StructureError("malformed PDB line " + std::to_string(line_no) + ": " + what);
}

int parse_int(std::string_view field, std::size_t line_no, const char* what) {
    const auto t = trim(field);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        malformed(line_no, std::string("bad ") + what + " '" + std::string(field) + "'");
    }
    return value;
}

double parse_real(std::string_view field, std::size_t line_no, const char* what) {
    const std::string t(trim(field));
    if (t.empty()) malformed(line_no, std::string("missing ") + what);
    char* end = nullptr;
    const double value = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(value)) {
        malformed(line_no, std::string("unparseable ") + what + " '" + t + "'");
    }
    return value;
}

}  // namespace

std::optional<int> amino_acid_index(char one_letter) {
    const auto pos = kAminoAcidLetters.find(one_letter);
    if (pos == std::string_view::npos) return std::nullopt;
    return static_cast<int>(pos);
}

std::optional<int> residue_type_from_name(std::string_view three_letter) {
    for (std::size_t i = 0; i < kThreeLetter.size(); ++i) {
        if (kThreeLetter[i] == three_letter) return static_cast<int>(i);
    }
    for (const auto& [name, parent] : kModified) {
        if (name == three_letter) return amino_acid_index(parent);
    }
    return std::nullopt;
}

std::string_view residue_three_letter(int type) { return kThreeLetter.at(static_cast<std::size_t>(type)); }

char residue_one_letter(int type) { return kAminoAcidLetters.at(static_cast<std::size_t>(type)); }

std::vector<int> sequence_to_types(std::string_view one_letter) {
    std::vector<int> out;
    for (char c : one_letter) {
        const auto idx = amino_acid_index(c);
        if (!idx) throw StructureError(std::string("unknown amino acid letter '") + c + "'");
        out.push_back(*idx);
    }
    return out;
}

std::string types_to_sequence(std::span<const int> types) {
    std::string out;
    for (int t : types) out.push_back(residue_one_letter(t));
    return out;
}

ParsedStructure parse_pdb(std::string_view text) {
    ParsedStructure out;
    std::set<std::tuple<char, int, char, std::string>> seen;
    std::size_t line_no = 0;
    std::size_t begin = 0;
    while (begin < text.size()) {
        std::size_t end = text.find('\n', begin);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(begin, end - begin);
        begin = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const auto record = line.substr(0, std::min<std::size_t>(6, line.size()));
        if (record == "END" || record == "END   " || record == "ENDMDL") break;
        if (record == "HETATM") {
            ++out.skipped_records;
            continue;
        }
        if (record != "ATOM  ") continue;
        if (line.size() < 54) malformed(line_no, "ATOM record shorter than 54 columns");

        AtomRecord a;
        a.serial = parse_int(column(line, 7, 11), line_no, "serial");
        a.name = std::string(trim(column(line, 13, 16)));
        if (a.name.empty()) malformed(line_no, "empty atom name");
        a.alt_loc = line[16];
        a.res_name = std::string(trim(column(line, 18, 20)));
        if (a.res_name.empty()) malformed(line_no, "empty residue name");
        a.chain = line[21];
        a.res_seq = parse_int(column(line, 23, 26), line_no, "residue number");
        a.icode = line[26];
        a.position = geom::Vec3(parse_real(column(line, 31, 38), line_no, "x coordinate"),
                                parse_real(column(line, 39, 46), line_no, "y coordinate"),
                                parse_real(column(line, 47, 54), line_no, "z coordinate"));
        if (!trim(column(line, 55, 60)).empty()) a.occupancy = parse_real(column(line, 55, 60), line_no, "occupancy");
        if (!trim(column(line, 61, 66)).empty()) a.b_factor = parse_real(column(line, 61, 66), line_no, "B-factor");
        a.element = std::string(trim(column(line, 77, 78)));

        if (!seen.emplace(a.chain, a.res_seq, a.icode, a.name).second) {
            if (a.alt_loc != ' ') ++out.dropped_altlocs;
            else ++out.skipped_records;
            continue;
        }
        out.atoms.push_back(std::move(a));
    }
    if (out.atoms.empty()) throw StructureError("empty structure");
    return out;
}

ParsedStructure read_pdb_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StructureError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_pdb(buffer.str());
}

std::string write_pdb(std::span<const AtomRecord> atoms) {
    if (atoms.empty()) throw StructureError("write_pdb: no atoms");
    std::string out;
    char line[96];
    for (const auto& a : atoms) {
        if (!a.position.allFinite()) throw StructureError("write_pdb: non-finite coordinate in atom " + a.name);
        if (a.position.cwiseAbs().maxCoeff() >= 9999.9995 || a.position.minCoeff() <= -999.9995) {
            throw StructureError("write_pdb: coordinate outside the fixed-column range in atom " + a.name);
        }
        if (a.name.size() > 4 || a.res_name.size() > 3 || a.element.size() > 2) {
            throw StructureError("write_pdb: field too wide in atom " + a.name);
        }
        std::string name = a.name;
        if (name.size() < 4 && a.element.size() != 2) name = " " + name;
        std::snprintf(line, sizeof(line), "ATOM  %5d %-4s%c%3s %c%4d%c   %8.3f%8.3f%8.3f%6.2f%6.2f          %2s\n",
                      a.serial % 100000, name.c_str(), a.alt_loc, a.res_name.c_str(), a.chain, a.res_seq, a.icode,
                      a.position.x(), a.position.y(), a.position.z(), a.occupancy, a.b_factor, a.element.c_str());
        out += line;
    }
    out += "END\n";
    return out;
}

std::string residue_number_string(const ResidueNumber& n) {
    std::string s = std::to_string(n.seq);
    if (n.icode != ' ') s.push_back(n.icode);
    return s;
}

std::vector<ResidueRecords> group_residues(std::span<const AtomRecord> atoms) {
    std::vector<ResidueRecords> out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto& a = atoms[i];
        const ResidueNumber number{a.res_seq, a.icode};
        if (out.empty() || out.back().chain != a.chain || out.back().number != number ||
            out.back().res_name != a.res_name) {
            out.push_back({a.chain, number, a.res_name, {}});
        }
        out.back().atoms.push_back(i);
    }
    return out;
}

}  // namespace cdrdiff
