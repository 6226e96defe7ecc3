#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bvcl/dataset.hpp"
#include "bvcl/inference.hpp"
#include "bvcl/kernels.hpp"
#include "bvcl/special.hpp"

using namespace bvcl;

namespace {

PredictiveDistribution dist_from_rows(const std::vector<std::vector<double>>& rows) {
    PredictiveDistribution pred;
    pred.per_sample_probs = Matrix(rows.size(), rows[0].size());
    pred.mean_probs.assign(rows[0].size(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[0].size(); ++c) {
            pred.per_sample_probs(r, c) = rows[r][c];
            pred.mean_probs[c] += rows[r][c] / static_cast<double>(rows.size());
        }
    return pred;
}

// Independent entropy for the oracle comparisons.
double oracle_entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

VariationalPosterior small_posterior(double log_sigma, std::uint64_t seed = 5) {
    const NetworkArchitecture arch{2, {6}, {3}};
    return init_variational(init_prior(arch, 1.0), seed, log_sigma);
}

TaskDataset separable_task(std::uint64_t seed) {
    SyntheticTaskSpec spec;
    spec.name = "sep";
    spec.num_classes = 2;
    spec.samples_per_class = 80;
    spec.feature_dim = 2;
    spec.cluster_separation = 10.0;
    spec.cluster_scale = 0.3;
    spec.seed = seed;
    TaskDataset ds = gen_synthetic_task(spec);
    return apply_standardization(fit_standardization(ds), ds);
}

}  // namespace

TEST_CASE("classify argmax and tie rules") {
    CHECK(classify(dist_from_rows({{0.1, 0.7, 0.2}})) == 1);
    CHECK(classify(dist_from_rows({{0.5, 0.5}})) == 0);
    CHECK(classify(dist_from_rows({{0.0, 0.0, 1.0}})) == 2);
}

TEST_CASE("predictive entropy closed forms") {
    CHECK(predictive_entropy(dist_from_rows({{0.25, 0.25, 0.25, 0.25}})) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(predictive_entropy(dist_from_rows({{0.0, 1.0, 0.0}})) == 0.0);
    CHECK(predictive_entropy(dist_from_rows({{0.5, 0.5, 0.0, 0.0}})) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mutual information closed forms and oracle") {
    // all rows identical -> 0
    CHECK(mutual_information(dist_from_rows({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}})) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // two one-hot rows on different classes -> ln 2
    CHECK(mutual_information(dist_from_rows({{1.0, 0.0}, {0.0, 1.0}})) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // random row-stochastic matrix vs a direct two-term evaluation
    RandomStream rs(3, 0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::vector<double>> rows(7, std::vector<double>(4));
        for (auto& row : rows) {
            double sum = 0.0;
            for (auto& v : row) {
                v = rs.next_unit();
                sum += v;
            }
            for (auto& v : row) v /= sum;
        }
        const auto pred = dist_from_rows(rows);

        std::vector<double> mean(4, 0.0);
        for (const auto& row : rows)
            for (std::size_t c = 0; c < 4; ++c) mean[c] += row[c] / 7.0;
        double mean_h = 0.0;
        for (const auto& row : rows) mean_h += oracle_entropy(row) / 7.0;
        const double expected = oracle_entropy(mean) - mean_h;

        CHECK(std::fabs(mutual_information(pred) - expected) < 1e-12);
        CHECK(mutual_information(pred) >= -1e-12);
        CHECK(mutual_information(pred) <= predictive_entropy(pred) + 1e-12);
    }
}

TEST_CASE("predictive_posterior with vanishing sigma is the deterministic softmax") {
    const auto post = small_posterior(-300.0);
    const std::vector<double> x{0.4, -1.2};
    RandomStream noise(7, 1);
    const auto pred = predictive_posterior(post, 0, x, 1, noise);

    Matrix xm(1, 2);
    xm(0, 0) = x[0];
    xm(0, 1) = x[1];
    const Matrix logits = forward_mean(post, 0, xm);
    const auto expected = softmax(std::span<const double>(logits.row_ptr(0), 3));
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(pred.mean_probs[c] == doctest::Approx(expected[c]).epsilon(1e-12));
    CHECK(!pred.head_trained);  // never trained, prior-predictive flag

    // in this single-draw deterministic case, rescaling the logits moves the
    // probabilities but not the argmax
    std::vector<double> scaled(logits.row_ptr(0), logits.row_ptr(0) + 3);
    for (double& v : scaled) v *= 3.7;
    const auto p_scaled = softmax(scaled);
    PredictiveDistribution alt;
    alt.per_sample_probs = Matrix(1, 3);
    alt.mean_probs = p_scaled;
    CHECK(classify(alt) == classify(pred));
}

TEST_CASE("predictive_posterior rows and mean are normalized") {
    const auto post = small_posterior(-0.5);
    RandomStream input_rs(9, 2);
    for (int rep = 0; rep < 50; ++rep) {
        const std::vector<double> x{input_rs.next_normal(), input_rs.next_normal()};
        RandomStream noise(10, static_cast<std::uint64_t>(rep));
        const auto pred = predictive_posterior(post, 0, x, 25, noise);
        double mean_sum = 0.0;
        for (double p : pred.mean_probs) mean_sum += p;
        CHECK(std::fabs(mean_sum - 1.0) < 1e-9);
        for (std::size_t r = 0; r < pred.per_sample_probs.rows; ++r) {
            double row_sum = 0.0;
            for (std::size_t c = 0; c < pred.per_sample_probs.cols; ++c)
                row_sum += pred.per_sample_probs(r, c);
            CHECK(std::fabs(row_sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("predictive_posterior is self-consistent across draw counts") {
    const auto post = small_posterior(-0.7, 11);
    const std::vector<double> x{0.8, 0.1};
    RandomStream n1(21, 1), n2(22, 2);
    const auto big = predictive_posterior(post, 0, x, 10000, n1);
    const auto small = predictive_posterior(post, 0, x, 100, n2);
    for (std::size_t c = 0; c < 3; ++c) {
        const double p = big.mean_probs[c];
        const double se = std::sqrt(std::max(p * (1.0 - p), 1e-6) *
                                    (1.0 / 10000.0 + 1.0 / 100.0));
        CHECK(std::fabs(big.mean_probs[c] - small.mean_probs[c]) < 3.0 * se);
    }
}

TEST_CASE("predictive_posterior input checks") {
    auto post = small_posterior(-1.0);
    RandomStream noise(1, 1);
    const std::vector<double> x{0.0, 0.0};
    CHECK_THROWS_AS(predictive_posterior(post, 5, x, 10, noise), std::invalid_argument);
    CHECK_THROWS_AS(predictive_posterior(post, 0, x, 0, noise), std::invalid_argument);
    const std::vector<double> short_x{1.0};
    CHECK_THROWS_AS(predictive_posterior(post, 0, short_x, 10, noise),
                    std::invalid_argument);
}

TEST_CASE("uncertainty_report on a well-separated trained task") {
    TaskDataset task = separable_task(12);
    const NetworkArchitecture arch{2, {16, 16}, {2}};
    HyperParams hyper;
    hyper.learning_rate = 0.01;
    hyper.beta = 0.001;
    hyper.epochs = 100;
    hyper.batch_size = 32;
    hyper.s_train = 5;
    const auto q = train_task(init_prior(arch, 1.0), task, 0, hyper, 3);

    const auto records = uncertainty_report(q, 0, task, 50, RandomStream(5, 9));
    CHECK(records.size() == task.size());

    double mean_entropy_correct = 0.0;
    std::size_t n_correct = 0;
    for (const auto& rec : records) {
        CHECK(rec.entropy >= -1e-9);
        CHECK(rec.entropy <= std::log(2.0) + 1e-9);
        CHECK(rec.mutual_information >= -1e-9);
        CHECK(rec.mutual_information <= rec.entropy + 1e-9);
        if (rec.correct) {
            mean_entropy_correct += rec.entropy;
            ++n_correct;
        }
    }
    CHECK(n_correct > task.size() * 9 / 10);
    mean_entropy_correct /= static_cast<double>(n_correct);
    CHECK(mean_entropy_correct < 0.2 * std::log(2.0));
}

TEST_CASE("uncertainty_report contract cases") {
    TaskDataset task = separable_task(13);
    const NetworkArchitecture arch{2, {8}, {2}};
    HyperParams hyper;
    hyper.epochs = 30;
    hyper.s_train = 4;
    hyper.learning_rate = 0.005;
    const auto q = train_task(init_prior(arch, 1.0), task, 0, hyper, 4);

    // adversarially permuted labels: everything wrong, records still well-formed
    TaskDataset flipped = task;
    for (auto& l : flipped.labels) l = 1 - l;
    const auto records = uncertainty_report(q, 0, flipped, 20, RandomStream(6, 1));
    CHECK(records.size() == flipped.size());
    std::size_t wrong = 0;
    for (const auto& rec : records)
        if (!rec.correct) ++wrong;
    CHECK(wrong > flipped.size() * 9 / 10);

    // untrained head is rejected
    const auto fresh = init_prior(arch, 1.0);
    CHECK_THROWS_AS(uncertainty_report(fresh, 0, task, 10, RandomStream(1, 1)),
                    std::invalid_argument);
}

TEST_CASE("mc_accuracy agrees with per-record correctness") {
    TaskDataset task = separable_task(14);
    const NetworkArchitecture arch{2, {8}, {2}};
    HyperParams hyper;
    hyper.epochs = 30;
    hyper.s_train = 4;
    hyper.learning_rate = 0.005;
    const auto q = train_task(init_prior(arch, 1.0), task, 0, hyper, 8);

    const RandomStream noise(4, 2);
    const double acc = mc_accuracy(q, 0, task, 20, noise);
    const auto records = uncertainty_report(q, 0, task, 20, noise);
    std::size_t correct = 0;
    for (const auto& rec : records)
        if (rec.correct) ++correct;
    CHECK(acc == doctest::Approx(static_cast<double>(correct) / task.size()).epsilon(1e-12));
}
