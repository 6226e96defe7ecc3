#pragma once

#include <span>
#include <vector>

#include "bvcl/bnn.hpp"

namespace bvcl {

// Monte Carlo predictive distribution for one input: S softmax rows, one per
// sampled network, plus their mean.
struct PredictiveDistribution {
    Matrix per_sample_probs;         // S x C, each row sums to 1
    std::vector<double> mean_probs;  // column means
    bool head_trained = true;        // false: prior-predictive, treat with care
};

struct UncertaintyRecord {
    std::size_t sample_index = 0;
    int true_label = 0;
    std::size_t predicted = 0;
    bool correct = false;
    double entropy = 0.0;             // nats
    double mutual_information = 0.0;  // nats
};

PredictiveDistribution predictive_posterior(const VariationalPosterior& post, std::size_t head,
                                            std::span<const double> x, std::size_t s,
                                            RandomStream& noise);

// Argmax of the mean probabilities; ties go to the lowest class index.
std::size_t classify(const PredictiveDistribution& pred);

// -sum p ln p with 0 ln 0 := 0.
double entropy_nats(std::span<const double> probs);

double predictive_entropy(const PredictiveDistribution& pred);

// Predictive entropy minus the mean per-draw entropy (epistemic part).
double mutual_information(const PredictiveDistribution& pred);

// One record per test sample; per-sample noise streams derived from `noise`.
std::vector<UncertaintyRecord> uncertainty_report(const VariationalPosterior& post,
                                                  std::size_t head, const TaskDataset& testset,
                                                  std::size_t s, const RandomStream& noise);

// Fraction of samples whose MC-mean argmax matches the label.
double mc_accuracy(const VariationalPosterior& post, std::size_t head, const TaskDataset& ds,
                   std::size_t s, const RandomStream& noise);

}  // namespace bvcl
