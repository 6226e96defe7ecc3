#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bvcl/bnn.hpp"
#include "bvcl/continual.hpp"
#include "bvcl/dataset.hpp"

namespace bvcl {

// One task source: a CSV file or an inline synthetic spec.
struct TaskSource {
    std::string name;
    std::string path;                            // CSV path, empty for synthetic
    std::optional<SyntheticTaskSpec> synthetic;
};

struct ExperimentConfig {
    std::vector<TaskSource> tasks;
    std::vector<std::vector<std::string>> orders;  // task names per order
    std::vector<std::size_t> hidden = {512, 512, 512};
    HyperParams hyper;
    GridSpec grid = GridSpec::defaults();
    std::vector<std::uint64_t> seeds = {1};
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
    std::uint64_t split_seed = 1;
    int threads = 0;  // 0 = all hardware threads
    std::string output_dir = "out";
    bool keep_checkpoints = false;
};

// Strict parse: schema-validated, unknown keys rejected, defaults merged.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// The defaults-merged config as a JSON document; itself a valid config.
std::string effective_config_json(const ExperimentConfig& cfg);

// Deterministic data pipeline shared by run/grid/uncertainty: load or
// generate, split (stratified, seeded per task), standardize on train.
std::vector<SplitDataset> prepare_tasks(const ExperimentConfig& cfg);
TaskSequence sequence_for_order(const ExperimentConfig& cfg,
                                const std::vector<SplitDataset>& splits,
                                const std::vector<std::string>& order);

// Full command-line entry point; returns the process exit code
// (0 ok, 1 config error, 2 data error, 3 numeric failure).
int run_cli(int argc, const char* const* argv);

}  // namespace bvcl
