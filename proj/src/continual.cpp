#include "bvcl/continual.hpp"

#include <algorithm>
#include <stdexcept>

#include "bvcl/error.hpp"
#include "bvcl/inference.hpp"

namespace bvcl {

namespace {

constexpr std::uint64_t kTrainTag = 0x100;
constexpr std::uint64_t kEvalTag = 0x200;
constexpr std::uint64_t kReferenceTag = 0x300;

std::uint64_t subseed(const RandomStream& base, std::uint64_t tag) {
    RandomStream rs = base.derive(tag);
    return rs.next_u64();
}

}  // namespace

GridSpec GridSpec::defaults() {
    return {{0.0001, 0.0005, 0.001, 0.005, 0.01}, {0.001, 0.01, 0.05, 0.1, 0.5, 1.0}};
}

void GridSpec::validate() const {
    if (learning_rates.empty() || betas.empty())
        throw std::invalid_argument("grid: learning_rates and betas must be non-empty");
    for (double lr : learning_rates)
        if (!(lr > 0)) throw std::invalid_argument("grid: learning rates must be > 0");
    for (double b : betas)
        if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("grid: betas must be in [0,1]");
}

RunRecord run_vcl(const TaskSequence& seq, const std::vector<std::size_t>& hidden,
                  const HyperParams& hyper, std::uint64_t seed, std::uint64_t stream_salt,
                  bool keep_checkpoints) {
    if (seq.tasks.empty()) throw std::invalid_argument("run_vcl: empty task sequence");
    hyper.validate();

    NetworkArchitecture arch;
    arch.input_dim = seq.tasks.front().train.dim();
    arch.hidden_sizes = hidden;
    for (const auto& t : seq.tasks) arch.head_sizes.push_back(t.train.num_classes);

    RunRecord rec;
    rec.order_label = seq.label;
    rec.hyper = hyper;
    rec.seed = seed;
    for (const auto& t : seq.tasks) rec.task_names.push_back(t.name);

    const RandomStream base(seed, RandomStream::mix64(stream_salt));
    VariationalPosterior q = init_prior(arch, hyper.prior_sigma);
    for (std::size_t k = 0; k < seq.tasks.size(); ++k) {
        q = train_task(q, seq.tasks[k].train, k, hyper,
                       subseed(base, kTrainTag + k));
        std::vector<double> val_row(k + 1), test_row(k + 1);
        for (std::size_t j = 0; j <= k; ++j) {
            val_row[j] = mc_accuracy(q, j, seq.tasks[j].val, hyper.s_test,
                                     base.derive(kEvalTag + 4 * (k * seq.tasks.size() + j)));
            test_row[j] = mc_accuracy(q, j, seq.tasks[j].test, hyper.s_test,
                                      base.derive(kEvalTag + 4 * (k * seq.tasks.size() + j) + 1));
        }
        rec.val_acc.append_row(std::move(val_row));
        rec.test_acc.append_row(std::move(test_row));
        if (keep_checkpoints) rec.checkpoints.push_back(q);
    }
    rec.final_posterior = std::move(q);
    return rec;
}

ReferenceResult train_reference(const SplitDataset& task, const std::vector<std::size_t>& hidden,
                                const GridSpec& grid, const HyperParams& base,
                                std::uint64_t seed) {
    grid.validate();
    if (task.train.size() == 0) throw std::invalid_argument("train_reference: empty task");

    std::vector<double> lrs = grid.learning_rates;
    std::vector<double> betas = grid.betas;
    std::sort(lrs.begin(), lrs.end());
    std::sort(betas.begin(), betas.end());

    NetworkArchitecture arch;
    arch.input_dim = task.train.dim();
    arch.hidden_sizes = hidden;
    arch.head_sizes = {task.train.num_classes};

    const RandomStream stream(seed, 0x4ef5);
    ReferenceResult best;
    double best_val = -1.0;
    std::size_t cell = 0;
    for (double lr : lrs) {
        for (double beta : betas) {
            HyperParams hp = base;
            hp.learning_rate = lr;
            hp.beta = beta;
            const VariationalPosterior prior = init_prior(arch, hp.prior_sigma);
            const VariationalPosterior post =
                train_task(prior, task.train, 0, hp, subseed(stream, kTrainTag + cell));
            const double val_acc =
                mc_accuracy(post, 0, task.val, hp.s_test, stream.derive(kEvalTag + 2 * cell));
            if (val_acc > best_val) {
                best_val = val_acc;
                best.val_accuracy = val_acc;
                best.test_accuracy = mc_accuracy(post, 0, task.test, hp.s_test,
                                                 stream.derive(kEvalTag + 2 * cell + 1));
                best.learning_rate = lr;
                best.beta = beta;
            }
            ++cell;
        }
    }
    return best;
}

std::vector<ReferenceResult> train_references(const TaskSequence& seq,
                                              const std::vector<std::size_t>& hidden,
                                              const GridSpec& grid, const HyperParams& base,
                                              std::uint64_t seed) {
    const RandomStream base_stream(seed, 0x961d);
    std::vector<ReferenceResult> refs(seq.tasks.size());
    for (std::size_t t = 0; t < seq.tasks.size(); ++t)
        refs[t] = train_reference(seq.tasks[t], hidden, grid, base,
                                  subseed(base_stream, kReferenceTag + t));
    return refs;
}

GridResult grid_search(const TaskSequence& seq, const std::vector<std::size_t>& hidden,
                       const GridSpec& grid, const HyperParams& base, std::uint64_t seed) {
    grid.validate();
    if (seq.tasks.empty()) throw std::invalid_argument("grid_search: empty task sequence");

    std::vector<double> lrs = grid.learning_rates;
    std::vector<double> betas = grid.betas;
    std::sort(lrs.begin(), lrs.end());
    std::sort(betas.begin(), betas.end());

    GridResult result;

    // References once per task, shared by every cell.
    result.references = train_references(seq, hidden, grid, base, seed);

    const std::size_t n_cells = lrs.size() * betas.size();
    result.cells.resize(n_cells);
    // Cells are independent; each owns a stream salt equal to its index, so
    // results do not depend on the parallel schedule.
#pragma omp parallel for schedule(dynamic)
    for (long long c = 0; c < static_cast<long long>(n_cells); ++c) {
        const std::size_t idx = static_cast<std::size_t>(c);
        HyperParams hp = base;
        hp.learning_rate = lrs[idx / betas.size()];
        hp.beta = betas[idx % betas.size()];
        RunRecord run = run_vcl(seq, hidden, hp, seed, idx + 1);
        CellResult& cell = result.cells[idx];
        cell.learning_rate = hp.learning_rate;
        cell.beta = hp.beta;
        cell.val_acc = std::move(run.val_acc);
        cell.test_acc = std::move(run.test_acc);
    }

    // Per-k argmin of the combined metric on validation; the ascending
    // (lr, beta) iteration order breaks ties toward lower lr, then lower beta.
    for (std::size_t k = 1; k <= seq.tasks.size(); ++k) {
        BestRow row;
        row.k = k;
        double best_combined = 0.0;
        bool first = true;
        for (const auto& cell : result.cells) {
            const double a = average_accuracy(cell.val_acc, k);
            const double f = forget(cell.val_acc, k).average;
            const double i = intransigence(result.references[k - 1].val_accuracy,
                                           cell.val_acc, k);
            const double combined = combined_metric(a, f, i);
            if (first || combined < best_combined) {
                first = false;
                best_combined = combined;
                row.learning_rate = cell.learning_rate;
                row.beta = cell.beta;
                row.average_acc = a;
                row.forget_avg = f;
                row.intransig = i;
                row.combined = combined;
            }
        }
        result.best.push_back(row);
    }
    return result;
}

}  // namespace bvcl
