#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bvcl/matrix.hpp"

namespace bvcl {

// One classification task: N samples of d features with integer labels in [0, num_classes).
struct TaskDataset {
    std::string name;
    Matrix features;          // N x d
    std::vector<int> labels;  // length N
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }
};

struct SplitDataset {
    std::string name;
    TaskDataset train, val, test;
    std::uint64_t split_seed = 0;
};

struct StandardizationParams {
    std::vector<double> mean;
    std::vector<double> std;  // entries > 0; zero-variance columns guarded to 1
};

struct SyntheticTaskSpec {
    std::string name;
    std::size_t num_classes = 2;
    std::size_t samples_per_class = 100;
    std::size_t feature_dim = 2;
    double cluster_separation = 1.0;
    double cluster_scale = 1.0;
    std::uint64_t seed = 0;
};

// Ordered tasks for one continual-learning experiment; position = head index.
struct TaskSequence {
    std::vector<SplitDataset> tasks;
    std::string label;

    std::size_t size() const { return tasks.size(); }
};

// CSV ingestion: header line, one column named `label` holding non-negative
// integers, every other column a 64-bit-parsable real feature. Comma-delimited,
// no quoting.
TaskDataset load_dataset(const std::string& path, const std::string& name = "",
                         const std::string& label_column = "label");

void write_dataset_csv(const TaskDataset& ds, const std::string& path);

StandardizationParams fit_standardization(const TaskDataset& train);

TaskDataset apply_standardization(const StandardizationParams& params, const TaskDataset& ds);

// Stratified-by-class random partition; deterministic given seed; every class
// appears in every split.
SplitDataset split_dataset(const TaskDataset& ds, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

// Fit standardization on the train split and apply it to all three splits.
SplitDataset standardize_split(const SplitDataset& split);

// Gaussian clusters with centers on a sphere of radius cluster_separation,
// maximally spread on a seeded randomly-rotated circle frame for d >= 2.
TaskDataset gen_synthetic_task(const SyntheticTaskSpec& spec);

TaskSequence make_sequence(const std::vector<SplitDataset>& datasets,
                           const std::vector<std::size_t>& order);

}  // namespace bvcl
