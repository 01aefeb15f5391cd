#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cdrdiff/structure.hpp"

namespace cdrdiff {

namespace {

char chain_char(const nlohmann::json& j, const char* field) {
    const auto s = j.get<std::string>();
    if (s.size() != 1) throw StructureError(std::string("manifest field '") + field + "' must be one character");
    return s[0];
}

ManifestEntry parse_entry(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw StructureError("manifest entry is not a JSON object");
    ManifestEntry e;
    const std::filesystem::path pdb = j.at("pdb").get<std::string>();
    e.pdb = pdb.is_absolute() ? pdb : base_dir / pdb;
    e.chains.heavy = chain_char(j.at("heavy"), "heavy");
    if (j.contains("light") && !j.at("light").is_null()) e.chains.light = chain_char(j.at("light"), "light");
    if (j.contains("antigen")) {
        const auto& ag = j.at("antigen");
        if (ag.is_array()) {
            for (const auto& c : ag) e.chains.antigen.push_back(chain_char(c, "antigen"));
        } else if (!ag.is_null()) {
            for (char c : ag.get<std::string>()) {
                if (c != ',' && c != ' ') e.chains.antigen.push_back(c);
            }
        }
    }
    e.cdr = parse_cdr_tag(j.value("cdr", std::string("H3")));
    e.split = j.value("split", std::string("train"));
    if (e.split != "train" && e.split != "test") throw StructureError("manifest split must be 'train' or 'test'");
    e.id = j.value("id", pdb.stem().string() + "_" + std::string(cdr_tag_name(e.cdr)));
    return e;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    std::vector<ManifestEntry> out;
    try {
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos) throw StructureError("empty manifest");
        if (text[first] == '[') {
            for (const auto& j : nlohmann::json::parse(text)) out.push_back(parse_entry(j, base_dir));
        } else {
            std::istringstream lines{std::string(text)};
            std::string line;
            while (std::getline(lines, line)) {
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                out.push_back(parse_entry(nlohmann::json::parse(line), base_dir));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw StructureError(std::string("malformed manifest: ") + e.what());
    }
    if (out.empty()) throw StructureError("empty manifest");
    return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StructureError("cannot open manifest " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_manifest(buffer.str(), path.parent_path());
}

}  // namespace cdrdiff
