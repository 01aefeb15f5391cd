/**
 * Run configuration, artifact serialization and the command workflows.
 */

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdrdiff/checkpoint.hpp"
#include "cdrdiff/evaluation.hpp"
#include "cdrdiff/sampling.hpp"

namespace cdrdiff::cli {

namespace fs = std::filesystem;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainingSettings {
    std::size_t steps = 2000;
    std::size_t batch_size = 4;
    std::size_t checkpoint_every = 500;
    std::size_t log_every = 50;
    /// Context residues kept around the generated region; 0 keeps everything.
    std::size_t max_residues = 0;
};

struct RunConfig {
    fs::path data_dir;
    fs::path output_dir;
    std::uint64_t seed = 0;
    nn::ModelConfig model;
    diff::ScheduleConfig schedules;
    AdamConfig optimizer;
    TrainingSettings training;
};

nlohmann::json config_to_json(const RunConfig& config);
/// Relative paths are resolved against `base_dir`. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

/// A prepared complex with the chain selection it was built from.
struct PreparedInstance {
    ComplexInstance instance;
    ChainSelection chains;
    std::string split = "train";
};

nlohmann::json instance_to_json(const PreparedInstance& prepared);
PreparedInstance instance_from_json(const nlohmann::json& j);
void save_instance(const fs::path& path, const PreparedInstance& prepared);
PreparedInstance load_instance(const fs::path& path);
/// Every *.json instance in `dir` except summary files, sorted by file name.
std::vector<PreparedInstance> load_instances(const fs::path& dir);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

struct PrepareFailure {
    std::string id;
    std::string reason;
};

struct PrepareSummary {
    std::vector<std::string> prepared;
    std::vector<PrepareFailure> failures;
};

PrepareSummary cmd_prepare(const fs::path& manifest, const fs::path& out_dir);

struct TrainResult {
    fs::path final_checkpoint;
    std::vector<diff::StepReport> log;
};

/// Trains from scratch, or continues from `resume` with its optimizer state.
TrainResult cmd_train(const RunConfig& config, const std::optional<fs::path>& resume = {});

struct DesignOptions {
    fs::path checkpoint;
    std::size_t count = 100;
    std::optional<fs::path> out_dir;
    std::optional<fs::path> instances_dir;
    std::optional<std::uint64_t> seed;
};

/// Model and resolved config from a checkpoint written by cmd_train.
struct LoadedModel {
    RunConfig config;
    std::unique_ptr<nn::DenoiserModel> model;
};
LoadedModel load_model(const fs::path& checkpoint);

eval::MetricReport cmd_sample(const DesignOptions& options);
eval::MetricReport cmd_optimize(const DesignOptions& options, std::size_t steps);
eval::MetricReport cmd_eval(const fs::path& designs_dir, const fs::path& references_dir,
                            const std::optional<fs::path>& out_dir = {});

}  // namespace cdrdiff::cli
