#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cdrdiff/cli.hpp"

namespace cdrdiff::cli {

namespace {

using nlohmann::json;

std::optional<std::size_t> crop_budget(const RunConfig& c) {
    if (c.training.max_residues == 0) return std::nullopt;
    return c.training.max_residues;
}

diff::TrainingExample example_for(const RunConfig& c, const ComplexInstance& inst) {
    return diff::make_example(inst, crop_budget(c), c.model.features.length_scale);
}

std::vector<geom::Vec3> region_ca(const ComplexInstance& inst) {
    std::vector<geom::Vec3> out;
    for (std::size_t i = inst.cdr_begin; i < inst.cdr_end; ++i) out.push_back(inst.residues[i].ca);
    return out;
}

std::string region_sequence(const ComplexInstance& inst) {
    std::string s;
    for (std::size_t i = inst.cdr_begin; i < inst.cdr_end; ++i) s += residue_one_letter(inst.residues[i].type);
    return s;
}

/// Value as it reads back from a fixed three-decimal PDB coordinate field.
double pdb_precision(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::strtod(buf, nullptr);
}

json checkpoint_metadata(const RunConfig& config, std::size_t step, const std::string& tag) {
    return {{"config", config_to_json(config)}, {"step", step}, {"tag", tag}};
}

std::string loss_row(const diff::StepReport& r) {
    return fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g}\n", r.step, r.loss.type, r.loss.pos, r.loss.ori,
                       r.loss.total);
}

std::vector<PreparedInstance> design_targets(const RunConfig& config, const DesignOptions& options) {
    const fs::path dir = options.instances_dir ? *options.instances_dir : config.data_dir;
    auto all = load_instances(dir);
    std::vector<PreparedInstance> test;
    for (auto& p : all)
        if (p.split == "test") test.push_back(p);
    if (test.empty()) test = std::move(all);
    if (test.empty()) throw std::runtime_error("no instances found in " + dir.string());
    return test;
}

eval::MetricReport run_designs(const DesignOptions& options, std::optional<std::size_t> steps) {
    const LoadedModel loaded = load_model(options.checkpoint);
    const RunConfig& config = loaded.config;
    const diff::ScheduleSet schedules = diff::make_schedules(config.schedules);
    if (steps && (*steps == 0 || *steps > schedules.steps)) {
        throw diff::DiffusionError(fmt::format("perturbation steps must lie in [1, {}]", schedules.steps));
    }
    const std::string default_dir = steps ? fmt::format("optimize_t{}", *steps) : "samples";
    const fs::path out_dir = options.out_dir ? *options.out_dir : options.checkpoint.parent_path() / default_dir;
    const std::uint64_t seed = options.seed ? *options.seed : config.seed;
    fs::create_directories(out_dir);

    std::vector<eval::MetricRow> rows;
    json summary = json::array();
    for (const auto& target : design_targets(config, options)) {
        const ComplexInstance& inst = target.instance;
        const diff::TrainingExample ex = example_for(config, inst);
        const std::uint64_t chain_seed = splitmix64(seed ^ fnv1a(inst.id));
        spdlog::info("{}: {} designs for {} ({} residues)", steps ? "optimize" : "sample", options.count, inst.id,
                     inst.cdr_length());
        const auto designs = steps ? diff::optimize_antibody(*loaded.model, ex, schedules, *steps, options.count,
                                                             chain_seed)
                                   : diff::sample(*loaded.model, ex, schedules, options.count, chain_seed);
        const std::string reference = region_sequence(inst);
        const auto ref_ca = region_ca(inst);
        for (std::size_t k = 0; k < designs.size(); ++k) {
            const auto& d = designs[k];
            const std::string id = fmt::format("{}__{:03d}", inst.id, k);
            const fs::path pdb = out_dir / (id + ".pdb");
            write_text(pdb, write_pdb(instance_atoms(d.instance)));
            eval::MetricRow row{id, std::string(cdr_tag_name(inst.cdr)), eval::aar(reference, d.sequence),
                                eval::rmsd_ca(ref_ca, region_ca(d.instance))};
            summary.push_back({{"design_id", id},
                               {"instance", inst.id},
                               {"cdr", row.cdr},
                               {"sequence", d.sequence},
                               {"reference", reference},
                               {"confidence", d.confidence},
                               {"aar", row.aar},
                               {"rmsd", row.rmsd},
                               {"pdb", pdb.filename().string()}});
            rows.push_back(std::move(row));
        }
    }
    eval::MetricReport report = eval::make_report(std::move(rows));
    json doc = {{"designs", summary},
                {"aar_mean", report.aar.mean},
                {"rmsd_mean", report.rmsd.mean},
                {"imp", report.imp}};
    if (steps) doc["perturbation_steps"] = *steps;
    write_text(out_dir / "designs.json", doc.dump(1) + "\n");
    write_text(out_dir / "metrics.csv", eval::report_csv(report));
    spdlog::info("mean AAR {:.2f}%, mean RMSD {:.3f} A over {} designs", report.aar.mean, report.rmsd.mean,
                 report.rows.size());
    return report;
}

}  // namespace

PrepareSummary cmd_prepare(const fs::path& manifest, const fs::path& out_dir) {
    const auto entries = load_manifest(manifest);
    fs::create_directories(out_dir);
    PrepareSummary summary;
    for (const auto& e : entries) {
        try {
            const ParsedStructure parsed = read_pdb_file(e.pdb);
            PreparedInstance p;
            p.instance = build_instance(parsed.atoms, e.chains, e.cdr);
            p.instance.id = e.id;
            p.chains = e.chains;
            p.split = e.split;
            save_instance(out_dir / (e.id + ".json"), p);
            summary.prepared.push_back(e.id);
            spdlog::info("prepared {}: {} residues, {} in {}", e.id, p.instance.residues.size(),
                         p.instance.cdr_length(), cdr_tag_name(e.cdr));
        } catch (const std::exception& ex) {
            summary.failures.push_back({e.id, ex.what()});
            spdlog::warn("skipped {}: {}", e.id, ex.what());
        }
    }
    json failures = json::array();
    for (const auto& f : summary.failures) failures.push_back({{"id", f.id}, {"reason", f.reason}});
    write_text(out_dir / "summary.json",
               json{{"prepared", summary.prepared}, {"failures", failures}}.dump(1) + "\n");
    return summary;
}

LoadedModel load_model(const fs::path& checkpoint) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    if (!ckpt.metadata.contains("config")) throw CheckpointError("checkpoint carries no run configuration");
    LoadedModel out;
    out.config = config_from_json(ckpt.metadata.at("config"), checkpoint.parent_path());
    out.model = std::make_unique<nn::DenoiserModel>(out.config.model, out.config.seed);
    restore_parameters(ckpt, out.model->params());
    return out;
}

TrainResult cmd_train(const RunConfig& config, const std::optional<fs::path>& resume) {
    if (config.output_dir.empty()) throw ConfigError("output_dir is required for training");
    std::vector<diff::TrainingExample> examples;
    for (const auto& p : load_instances(config.data_dir)) {
        if (p.split == "train") examples.push_back(example_for(config, p.instance));
    }
    if (examples.empty()) throw ConfigError("no training instances in " + config.data_dir.string());

    nn::DenoiserModel model(config.model, config.seed);
    diff::TrainConfig tc;
    tc.steps = config.training.steps;
    tc.batch_size = config.training.batch_size;
    tc.seed = config.seed;
    tc.adam = config.optimizer;
    diff::Trainer trainer(model, diff::make_schedules(config.schedules), tc, std::move(examples));

    const fs::path ckpt_dir = config.output_dir / "checkpoints";
    const fs::path log_path = config.output_dir / "loss.csv";
    fs::create_directories(ckpt_dir);
    std::string log = "step,L_type,L_pos,L_ori,total\n";
    if (resume) {
        const Checkpoint ckpt = load_checkpoint(*resume);
        restore_parameters(ckpt, model.params());
        const std::size_t done = ckpt.metadata.at("step").get<std::size_t>();
        trainer.resume(restore_adam(ckpt, model.params()), done);
        if (fs::exists(log_path)) {
            std::istringstream in(read_text(log_path));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (std::stoull(line.substr(0, line.find(','))) <= done) log += line + "\n";
            }
        }
        spdlog::info("resumed from {} at step {}", resume->string(), done);
    }
    write_text(config.output_dir / "config.resolved.json", config_to_json(config).dump(2) + "\n");

    TrainResult result;
    while (trainer.steps_done() < config.training.steps) {
        diff::StepReport r;
        try {
            r = trainer.step();
        } catch (const diff::TrainingError& e) {
            write_text(config.output_dir / "failure.json",
                       json{{"step", trainer.steps_done() + 1}, {"message", e.what()}}.dump(1) + "\n");
            throw;
        }
        log += loss_row(r);
        result.log.push_back(r);
        if (config.training.log_every && r.step % config.training.log_every == 0) {
            spdlog::info("step {}: type {:.4f} pos {:.4f} ori {:.4f} total {:.4f}", r.step, r.loss.type, r.loss.pos,
                         r.loss.ori, r.loss.total);
        }
        if (config.training.checkpoint_every && r.step % config.training.checkpoint_every == 0 &&
            r.step < config.training.steps) {
            save_checkpoint(ckpt_dir / fmt::format("step_{:06d}.ckpt", r.step),
                            make_checkpoint(model.params(), &trainer.adam(),
                                            checkpoint_metadata(config, r.step, "periodic")));
        }
    }
    write_text(log_path, log);
    result.final_checkpoint = ckpt_dir / "final.ckpt";
    save_checkpoint(result.final_checkpoint, make_checkpoint(model.params(), &trainer.adam(),
                                                             checkpoint_metadata(config, trainer.steps_done(),
                                                                                 "final")));
    spdlog::info("wrote {}", result.final_checkpoint.string());
    return result;
}

eval::MetricReport cmd_sample(const DesignOptions& options) { return run_designs(options, std::nullopt); }

eval::MetricReport cmd_optimize(const DesignOptions& options, std::size_t steps) {
    return run_designs(options, steps);
}

eval::MetricReport cmd_eval(const fs::path& designs_dir, const fs::path& references_dir,
                            const std::optional<fs::path>& out_dir) {
    std::map<std::string, PreparedInstance> references;
    for (auto& p : load_instances(references_dir)) references.emplace(p.instance.id, std::move(p));
    if (!fs::is_directory(designs_dir)) throw std::runtime_error("designs directory does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(designs_dir))
        if (e.path().extension() == ".pdb") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no design PDB files in " + designs_dir.string());

    std::vector<eval::MetricRow> rows;
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        const auto sep = stem.rfind("__");
        const std::string ref_id = sep == std::string::npos ? stem : stem.substr(0, sep);
        const auto it = references.find(ref_id);
        if (it == references.end()) throw std::runtime_error("no reference instance '" + ref_id + "' for " + stem);
        const PreparedInstance& ref = it->second;
        const ComplexInstance design = build_instance(read_pdb_file(f).atoms, ref.chains, ref.instance.cdr);
        if (design.cdr_length() != ref.instance.cdr_length()) {
            throw eval::MetricError(stem + ": designed region length differs from the reference");
        }
        std::vector<geom::Vec3> ref_ca = region_ca(ref.instance);
        for (auto& p : ref_ca)
            for (int d = 0; d < 3; ++d) p[d] = pdb_precision(p[d]);
        rows.push_back({stem, std::string(cdr_tag_name(ref.instance.cdr)),
                        eval::aar(region_sequence(ref.instance), region_sequence(design)),
                        eval::rmsd_ca(ref_ca, region_ca(design))});
    }
    eval::MetricReport report = eval::make_report(std::move(rows));
    write_text((out_dir ? *out_dir : designs_dir) / "metrics.csv", eval::report_csv(report));
    spdlog::info("evaluated {} designs: mean AAR {:.2f}%, mean RMSD {:.3f} A (IMP {})", report.rows.size(),
                 report.aar.mean, report.rmsd.mean, report.imp);
    return report;
}

}  // namespace cdrdiff::cli
