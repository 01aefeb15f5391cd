#include <cstdlib>
#include <iostream>
#include <typeinfo>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cdrdiff/cli.hpp"

namespace {

namespace cli = cdrdiff::cli;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("cdrdiff");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* level = std::getenv("CDRDIFF_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const cli::ConfigError*>(&e)) return "config";
    if (dynamic_cast<const cdrdiff::CheckpointError*>(&e)) return "checkpoint";
    if (dynamic_cast<const cdrdiff::StructureError*>(&e)) return "structure";
    if (dynamic_cast<const cdrdiff::diff::TrainingError*>(&e)) return "training";
    if (dynamic_cast<const cdrdiff::diff::DiffusionError*>(&e)) return "diffusion";
    if (dynamic_cast<const cdrdiff::eval::MetricError*>(&e)) return "evaluation";
    return "runtime";
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Sequence and structure co-design of antibody CDRs by equivariant diffusion"};
    app.require_subcommand(1);

    std::string manifest, prepare_out;
    auto* prepare = app.add_subcommand("prepare", "Parse complexes listed in a manifest into instance files");
    prepare->add_option("--manifest", manifest, "Manifest (JSON array or JSON lines)")->required();
    prepare->add_option("--out", prepare_out, "Output directory")->required();

    std::string config_path, resume;
    std::size_t train_steps = 0;
    auto* train = app.add_subcommand("train", "Train the denoising network");
    train->add_option("--config", config_path, "Run configuration (JSON)")->required();
    train->add_option("--resume", resume, "Checkpoint to continue from");
    train->add_option("--steps", train_steps, "Override the number of training steps");

    cli::DesignOptions design;
    std::string design_out, instances;
    std::uint64_t seed = 0;
    std::size_t perturb = 0;
    auto add_design_options = [&](CLI::App* cmd) {
        cmd->add_option("--checkpoint", design.checkpoint, "Trained checkpoint")->required();
        cmd->add_option("--count", design.count, "Designs per complex")->default_val(100);
        cmd->add_option("--out", design_out, "Output directory");
        cmd->add_option("--instances", instances, "Prepared instance directory (default: the training data)");
        cmd->add_option("--seed", seed, "Override the master seed");
    };
    auto* sample = app.add_subcommand("sample", "Design CDRs from the prior");
    add_design_options(sample);
    auto* optimize = app.add_subcommand("optimize", "Perturb native CDRs for t steps and denoise them");
    add_design_options(optimize);
    optimize->add_option("--steps", perturb, "Perturbation steps t")->required();

    std::string designs_dir, references_dir, eval_out;
    auto* evaluate = app.add_subcommand("eval", "Score design PDBs against prepared references");
    evaluate->add_option("--designs", designs_dir, "Directory of design PDB files")->required();
    evaluate->add_option("--references", references_dir, "Directory of prepared instances")->required();
    evaluate->add_option("--out", eval_out, "Directory for metrics.csv (default: the designs directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (prepare->parsed()) {
            const auto summary = cli::cmd_prepare(manifest, prepare_out);
            std::cout << summary.prepared.size() << " prepared, " << summary.failures.size() << " failed\n";
        } else if (train->parsed()) {
            cli::RunConfig config = cli::load_config(config_path);
            if (train_steps) config.training.steps = train_steps;
            const auto result =
                cli::cmd_train(config, resume.empty() ? std::nullopt : std::optional<cli::fs::path>(resume));
            std::cout << result.final_checkpoint.string() << "\n";
        } else if (sample->parsed() || optimize->parsed()) {
            if (!design_out.empty()) design.out_dir = design_out;
            if (!instances.empty()) design.instances_dir = instances;
            if (sample->parsed() ? sample->count("--seed") : optimize->count("--seed")) design.seed = seed;
            const auto report = sample->parsed() ? cli::cmd_sample(design) : cli::cmd_optimize(design, perturb);
            std::cout << "AAR " << report.aar.mean << " RMSD " << report.rmsd.mean << "\n";
        } else if (evaluate->parsed()) {
            const auto report = cli::cmd_eval(designs_dir, references_dir,
                                              eval_out.empty() ? std::nullopt : std::optional<cli::fs::path>(eval_out));
            std::cout << "AAR " << report.aar.mean << " RMSD " << report.rmsd.mean << "\n";
        }
    } catch (const std::exception& e) {
        return fail(error_kind(e), e.what(), 1);
    }
    return 0;
}
