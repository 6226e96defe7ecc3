#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bvcl/bnn.hpp"
#include "bvcl/dataset.hpp"
#include "bvcl/metrics.hpp"

namespace bvcl {

// One full sequential run: val/test accuracy matrices filled row by row.
struct RunRecord {
    std::string order_label;
    HyperParams hyper;
    std::uint64_t seed = 0;
    AccuracyMatrix val_acc;
    AccuracyMatrix test_acc;
    VariationalPosterior final_posterior;
    std::vector<VariationalPosterior> checkpoints;  // per k, only when requested
    std::vector<std::string> task_names;
};

struct GridSpec {
    std::vector<double> learning_rates;
    std::vector<double> betas;

    static GridSpec defaults();
    void validate() const;
};

// Accuracy of the grid-selected single-task model (selection on validation).
struct ReferenceResult {
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double learning_rate = 0.0;
    double beta = 0.0;
};

struct CellResult {
    double learning_rate = 0.0;
    double beta = 0.0;
    AccuracyMatrix val_acc;
    AccuracyMatrix test_acc;
};

struct BestRow {
    std::size_t k = 0;
    double learning_rate = 0.0;
    double beta = 0.0;
    double average_acc = 0.0;
    double forget_avg = 0.0;
    double intransig = 0.0;
    double combined = 0.0;
};

struct GridResult {
    std::vector<CellResult> cells;          // lr-major, beta-minor, both ascending
    std::vector<ReferenceResult> references;  // one per task in sequence order
    std::vector<BestRow> best;              // per k, selected on validation
};

// Sequential training over the task order: train head k on task k, then
// evaluate all heads 1..k on their val and test splits with s_test MC draws.
// hidden gives the shared trunk widths; head sizes come from the sequence.
// stream_salt decorrelates parallel grid cells; results depend only on
// (seq, hidden, hyper, seed, stream_salt).
RunRecord run_vcl(const TaskSequence& seq, const std::vector<std::size_t>& hidden,
                  const HyperParams& hyper, std::uint64_t seed, std::uint64_t stream_salt = 0,
                  bool keep_checkpoints = false);

// Fresh single-head model per grid cell, selected by validation accuracy.
ReferenceResult train_reference(const SplitDataset& task, const std::vector<std::size_t>& hidden,
                                const GridSpec& grid, const HyperParams& base,
                                std::uint64_t seed);

// One reference per task with the derivation grid_search uses, so a singleton
// grid and a plain run see identical references.
std::vector<ReferenceResult> train_references(const TaskSequence& seq,
                                              const std::vector<std::size_t>& hidden,
                                              const GridSpec& grid, const HyperParams& base,
                                              std::uint64_t seed);

// Full sweep: one run_vcl per cell, references per task, and the per-k argmin
// of (1 - A_k) + F_k + I_k on validation. Ties break to lower lr, then lower beta.
GridResult grid_search(const TaskSequence& seq, const std::vector<std::size_t>& hidden,
                       const GridSpec& grid, const HyperParams& base, std::uint64_t seed);

}  // namespace bvcl
