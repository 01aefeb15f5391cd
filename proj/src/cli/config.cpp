#include <fstream>
#include <set>
#include <sstream>

#include "cdrdiff/cli.hpp"

namespace cdrdiff::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& into) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json features_json(const feat::FeatureConfig& f) {
    return {{"atom_cutoff", f.atom_cutoff},       {"knn", f.knn},
            {"atom_rbf", f.atom_rbf},             {"pair_rbf", f.pair_rbf},
            {"pair_rbf_max", f.pair_rbf_max},     {"max_separation", f.max_separation},
            {"length_scale", f.length_scale}};
}

json model_json(const nn::ModelConfig& m) {
    return {{"features", features_json(m.features)},
            {"residue_dim", m.residue_dim},
            {"pair_dim", m.pair_dim},
            {"atom_dim", m.atom_dim},
            {"hidden_dim", m.hidden_dim},
            {"embed_dim", m.embed_dim},
            {"time_dim", m.time_dim},
            {"vismp_layers", m.vismp_layers},
            {"ipa_layers", m.ipa_layers},
            {"ipa_heads", m.ipa_heads},
            {"ipa_head_dim", m.ipa_head_dim},
            {"ipa_query_points", m.ipa_query_points},
            {"ipa_value_points", m.ipa_value_points},
            {"ipa_pair_out", m.ipa_pair_out},
            {"message_norm", m.message_norm}};
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty()) return p;
    if (p.is_absolute()) return p.lexically_normal();
    return fs::absolute(base / p).lexically_normal();
}

}  // namespace

json config_to_json(const RunConfig& c) {
    const auto& s = c.schedules;
    const auto& o = c.optimizer;
    const auto& t = c.training;
    return {{"data_dir", c.data_dir.string()},
            {"output_dir", c.output_dir.string()},
            {"seed", c.seed},
            {"model", model_json(c.model)},
            {"schedules",
             {{"steps", s.steps},
              {"type_beta_min", s.type_beta_min},
              {"type_beta_max", s.type_beta_max},
              {"pos_beta_first", s.pos_beta_first},
              {"pos_beta_last", s.pos_beta_last},
              {"ori_beta_first", s.ori_beta_first},
              {"ori_beta_last", s.ori_beta_last}}},
            {"optimizer",
             {{"learning_rate", o.learning_rate},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"epsilon", o.epsilon},
              {"weight_decay", o.weight_decay},
              {"max_grad_norm", o.max_grad_norm}}},
            {"training",
             {{"steps", t.steps},
              {"batch_size", t.batch_size},
              {"checkpoint_every", t.checkpoint_every},
              {"log_every", t.log_every},
              {"max_residues", t.max_residues}}}};
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
    check_keys(j, {"data_dir", "output_dir", "seed", "model", "schedules", "optimizer", "training"}, "config");
    RunConfig c;
    std::string data_dir, output_dir;
    read(j, "data_dir", data_dir);
    read(j, "output_dir", output_dir);
    read(j, "seed", c.seed);
    c.data_dir = resolve(data_dir, base_dir);
    c.output_dir = resolve(output_dir, base_dir);

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m,
                   {"features", "residue_dim", "pair_dim", "atom_dim", "hidden_dim", "embed_dim", "time_dim",
                    "vismp_layers", "ipa_layers", "ipa_heads", "ipa_head_dim", "ipa_query_points",
                    "ipa_value_points", "ipa_pair_out", "message_norm"},
                   "model");
        auto& mc = c.model;
        if (m.contains("features")) {
            const json& f = m.at("features");
            check_keys(f,
                       {"atom_cutoff", "knn", "atom_rbf", "pair_rbf", "pair_rbf_max", "max_separation",
                        "length_scale"},
                       "model.features");
            read(f, "atom_cutoff", mc.features.atom_cutoff);
            read(f, "knn", mc.features.knn);
            read(f, "atom_rbf", mc.features.atom_rbf);
            read(f, "pair_rbf", mc.features.pair_rbf);
            read(f, "pair_rbf_max", mc.features.pair_rbf_max);
            read(f, "max_separation", mc.features.max_separation);
            read(f, "length_scale", mc.features.length_scale);
        }
        read(m, "residue_dim", mc.residue_dim);
        read(m, "pair_dim", mc.pair_dim);
        read(m, "atom_dim", mc.atom_dim);
        read(m, "hidden_dim", mc.hidden_dim);
        read(m, "embed_dim", mc.embed_dim);
        read(m, "time_dim", mc.time_dim);
        read(m, "vismp_layers", mc.vismp_layers);
        read(m, "ipa_layers", mc.ipa_layers);
        read(m, "ipa_heads", mc.ipa_heads);
        read(m, "ipa_head_dim", mc.ipa_head_dim);
        read(m, "ipa_query_points", mc.ipa_query_points);
        read(m, "ipa_value_points", mc.ipa_value_points);
        read(m, "ipa_pair_out", mc.ipa_pair_out);
        read(m, "message_norm", mc.message_norm);
    }
    if (j.contains("schedules")) {
        const json& s = j.at("schedules");
        check_keys(s,
                   {"steps", "type_beta_min", "type_beta_max", "pos_beta_first", "pos_beta_last", "ori_beta_first",
                    "ori_beta_last"},
                   "schedules");
        read(s, "steps", c.schedules.steps);
        read(s, "type_beta_min", c.schedules.type_beta_min);
        read(s, "type_beta_max", c.schedules.type_beta_max);
        read(s, "pos_beta_first", c.schedules.pos_beta_first);
        read(s, "pos_beta_last", c.schedules.pos_beta_last);
        read(s, "ori_beta_first", c.schedules.ori_beta_first);
        read(s, "ori_beta_last", c.schedules.ori_beta_last);
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        check_keys(o, {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "max_grad_norm"}, "optimizer");
        read(o, "learning_rate", c.optimizer.learning_rate);
        read(o, "beta1", c.optimizer.beta1);
        read(o, "beta2", c.optimizer.beta2);
        read(o, "epsilon", c.optimizer.epsilon);
        read(o, "weight_decay", c.optimizer.weight_decay);
        read(o, "max_grad_norm", c.optimizer.max_grad_norm);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        check_keys(t, {"steps", "batch_size", "checkpoint_every", "log_every", "max_residues"}, "training");
        read(t, "steps", c.training.steps);
        read(t, "batch_size", c.training.batch_size);
        read(t, "checkpoint_every", c.training.checkpoint_every);
        read(t, "log_every", c.training.log_every);
        read(t, "max_residues", c.training.max_residues);
    }
    if (c.training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
    if (c.model.features.knn == 0) throw ConfigError("model.features.knn must be positive");
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
    }
    RunConfig c = config_from_json(j, path.parent_path());
    if (!c.data_dir.empty() && !fs::is_directory(c.data_dir)) {
        throw ConfigError("data_dir does not exist: " + c.data_dir.string());
    }
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cdrdiff::cli
