#include "bvcl/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "bvcl/error.hpp"
#include "bvcl/special.hpp"

namespace bvcl {

PredictiveDistribution predictive_posterior(const VariationalPosterior& post, std::size_t head,
                                            std::span<const double> x, std::size_t s,
                                            RandomStream& noise) {
    if (head >= post.heads.size())
        throw std::invalid_argument("predictive_posterior: head index out of range");
    if (s < 1) throw std::invalid_argument("predictive_posterior: need at least one draw");
    if (x.size() != post.arch.input_dim)
        throw std::invalid_argument("predictive_posterior: input dimension mismatch");

    // S independent full-network draws: the input tiled S times, fresh noise per row.
    Matrix tiled(s, x.size());
    for (std::size_t row = 0; row < s; ++row)
        for (std::size_t j = 0; j < x.size(); ++j) tiled(row, j) = x[j];
    const Matrix logits = forward_local_reparam(post, head, tiled, noise);

    const std::size_t c_count = logits.cols;
    PredictiveDistribution pred;
    pred.head_trained = post.trained_heads.contains(head);
    pred.per_sample_probs = Matrix(s, c_count);
    pred.mean_probs.assign(c_count, 0.0);
    for (std::size_t row = 0; row < s; ++row) {
        const auto p = softmax(std::span<const double>(logits.row_ptr(row), c_count));
        for (std::size_t j = 0; j < c_count; ++j) {
            pred.per_sample_probs(row, j) = p[j];
            pred.mean_probs[j] += p[j];
        }
    }
    for (double& v : pred.mean_probs) v /= static_cast<double>(s);
    return pred;
}

std::size_t classify(const PredictiveDistribution& pred) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < pred.mean_probs.size(); ++j)
        if (pred.mean_probs[j] > pred.mean_probs[best]) best = j;
    return best;
}

double entropy_nats(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double predictive_entropy(const PredictiveDistribution& pred) {
    return entropy_nats(pred.mean_probs);
}

double mutual_information(const PredictiveDistribution& pred) {
    const std::size_t s = pred.per_sample_probs.rows;
    const std::size_t c_count = pred.per_sample_probs.cols;
    double mean_row_entropy = 0.0;
    for (std::size_t row = 0; row < s; ++row)
        mean_row_entropy +=
            entropy_nats(std::span<const double>(pred.per_sample_probs.row_ptr(row), c_count));
    mean_row_entropy /= static_cast<double>(s);
    return entropy_nats(pred.mean_probs) - mean_row_entropy;
}

std::vector<UncertaintyRecord> uncertainty_report(const VariationalPosterior& post,
                                                  std::size_t head, const TaskDataset& testset,
                                                  std::size_t s, const RandomStream& noise) {
    if (head >= post.heads.size())
        throw std::invalid_argument("uncertainty_report: head index out of range");
    if (!post.trained_heads.contains(head))
        throw std::invalid_argument("uncertainty_report: head has not been trained");

    std::vector<UncertaintyRecord> records(testset.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(testset.size()); ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        RandomStream rs = noise.derive(idx);
        const auto pred = predictive_posterior(
            post, head,
            std::span<const double>(testset.features.row_ptr(idx), testset.dim()), s, rs);
        UncertaintyRecord& rec = records[idx];
        rec.sample_index = idx;
        rec.true_label = testset.labels[idx];
        rec.predicted = classify(pred);
        rec.correct = rec.predicted == static_cast<std::size_t>(rec.true_label);
        rec.entropy = predictive_entropy(pred);
        rec.mutual_information = mutual_information(pred);
    }
    return records;
}

double mc_accuracy(const VariationalPosterior& post, std::size_t head, const TaskDataset& ds,
                   std::size_t s, const RandomStream& noise) {
    if (ds.size() == 0) throw std::invalid_argument("mc_accuracy: empty dataset");
    long long correct = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : correct)
    for (long long i = 0; i < static_cast<long long>(ds.size()); ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        RandomStream rs = noise.derive(idx);
        const auto pred = predictive_posterior(
            post, head, std::span<const double>(ds.features.row_ptr(idx), ds.dim()), s, rs);
        if (classify(pred) == static_cast<std::size_t>(ds.labels[idx])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace bvcl
