#include <algorithm>

#include "cdrdiff/cli.hpp"

namespace cdrdiff::cli {

namespace {

using nlohmann::json;

json vec_json(const geom::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

geom::Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("instance: expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json mat_json(const geom::Mat3& m) {
    json out = json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) out.push_back(m(i, k));
    return out;
}

geom::Mat3 mat_from(const json& j) {
    if (!j.is_array() || j.size() != 9) throw std::runtime_error("instance: expected 9 frame values");
    geom::Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) m(i, k) = j[static_cast<std::size_t>(3 * i + k)].get<double>();
    return m;
}

const char* role_name(ChainRole r) {
    switch (r) {
        case ChainRole::Heavy: return "heavy";
        case ChainRole::Light: return "light";
        case ChainRole::Antigen: return "antigen";
    }
    return "antigen";
}

ChainRole role_from(const std::string& s) {
    if (s == "heavy") return ChainRole::Heavy;
    if (s == "light") return ChainRole::Light;
    if (s == "antigen") return ChainRole::Antigen;
    throw std::runtime_error("instance: unknown chain role '" + s + "'");
}

}  // namespace

json instance_to_json(const PreparedInstance& p) {
    const ComplexInstance& inst = p.instance;
    json residues = json::array();
    for (const Residue& r : inst.residues) {
        residues.push_back({{"type", std::string(1, residue_one_letter(r.type))},
                            {"chain", std::string(1, r.chain)},
                            {"seq", r.number.seq},
                            {"icode", std::string(1, r.number.icode)},
                            {"chain_pos", r.chain_pos},
                            {"role", role_name(r.role)},
                            {"n", vec_json(r.n)},
                            {"ca", vec_json(r.ca)},
                            {"c", vec_json(r.c)},
                            {"o", vec_json(r.o)},
                            {"cb", vec_json(r.cb)},
                            {"cb_virtual", r.cb_virtual},
                            {"frame", mat_json(r.frame)}});
    }
    json antigen = json::array();
    for (char c : p.chains.antigen) antigen.push_back(std::string(1, c));
    return {{"id", inst.id},
            {"split", p.split},
            {"cdr", std::string(cdr_tag_name(inst.cdr))},
            {"cdr_begin", inst.cdr_begin},
            {"cdr_end", inst.cdr_end},
            {"dropped_residues", inst.dropped_residues},
            {"chains",
             {{"heavy", std::string(1, p.chains.heavy)},
              {"light", p.chains.light ? json(std::string(1, *p.chains.light)) : json(nullptr)},
              {"antigen", antigen}}},
            {"residues", residues}};
}

PreparedInstance instance_from_json(const json& j) {
    try {
        PreparedInstance p;
        ComplexInstance& inst = p.instance;
        inst.id = j.at("id").get<std::string>();
        p.split = j.value("split", std::string("train"));
        inst.cdr = parse_cdr_tag(j.at("cdr").get<std::string>());
        inst.cdr_begin = j.at("cdr_begin").get<std::size_t>();
        inst.cdr_end = j.at("cdr_end").get<std::size_t>();
        inst.dropped_residues = j.value("dropped_residues", std::size_t{0});
        const json& chains = j.at("chains");
        p.chains.heavy = chains.at("heavy").get<std::string>().at(0);
        if (!chains.at("light").is_null()) p.chains.light = chains.at("light").get<std::string>().at(0);
        for (const auto& a : chains.at("antigen")) p.chains.antigen.push_back(a.get<std::string>().at(0));
        for (const json& rj : j.at("residues")) {
            Residue r;
            const auto type = amino_acid_index(rj.at("type").get<std::string>().at(0));
            if (!type) throw std::runtime_error("instance: unknown residue type");
            r.type = *type;
            r.chain = rj.at("chain").get<std::string>().at(0);
            r.number.seq = rj.at("seq").get<int>();
            r.number.icode = rj.at("icode").get<std::string>().at(0);
            r.chain_pos = rj.at("chain_pos").get<std::size_t>();
            r.role = role_from(rj.at("role").get<std::string>());
            r.n = vec_from(rj.at("n"));
            r.ca = vec_from(rj.at("ca"));
            r.c = vec_from(rj.at("c"));
            r.o = vec_from(rj.at("o"));
            r.cb = vec_from(rj.at("cb"));
            r.cb_virtual = rj.at("cb_virtual").get<bool>();
            r.frame = mat_from(rj.at("frame"));
            inst.residues.push_back(r);
        }
        if (inst.cdr_begin >= inst.cdr_end || inst.cdr_end > inst.residues.size()) {
            throw std::runtime_error("instance '" + inst.id + "': invalid CDR range");
        }
        return p;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed instance: ") + e.what());
    }
}

void save_instance(const fs::path& path, const PreparedInstance& prepared) {
    write_text(path, instance_to_json(prepared).dump(1) + "\n");
}

PreparedInstance load_instance(const fs::path& path) {
    try {
        return instance_from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw std::runtime_error("cannot parse instance " + path.string() + ": " + e.what());
    }
}

std::vector<PreparedInstance> load_instances(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("instance directory does not exist: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json" && e.path().filename() != "summary.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<PreparedInstance> out;
    for (const auto& f : files) out.push_back(load_instance(f));
    return out;
}

}  // namespace cdrdiff::cli
