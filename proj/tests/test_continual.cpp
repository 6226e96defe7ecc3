#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bvcl/continual.hpp"
#include "bvcl/dataset.hpp"
#include "bvcl/metrics.hpp"

using namespace bvcl;

namespace {

SplitDataset synthetic_split(const std::string& name, std::uint64_t seed, double separation,
                             double scale, std::size_t classes = 2,
                             std::size_t per_class = 100) {
    SyntheticTaskSpec spec;
    spec.name = name;
    spec.num_classes = classes;
    spec.samples_per_class = per_class;
    spec.feature_dim = 2;
    spec.cluster_separation = separation;
    spec.cluster_scale = scale;
    spec.seed = seed;
    return standardize_split(split_dataset(gen_synthetic_task(spec), {0.8, 0.1, 0.1}, seed));
}

HyperParams fast_hyper() {
    HyperParams h;
    h.learning_rate = 0.01;
    h.beta = 0.1;
    h.epochs = 60;
    h.batch_size = 32;
    h.s_train = 5;
    h.s_test = 50;
    return h;
}

bool posterior_equal(const VariationalPosterior& a, const VariationalPosterior& b) {
    if (a.shared.size() != b.shared.size() || a.heads.size() != b.heads.size()) return false;
    for (std::size_t l = 0; l < a.shared.size(); ++l)
        if (a.shared[l].mu != b.shared[l].mu || a.shared[l].log_sigma != b.shared[l].log_sigma)
            return false;
    for (std::size_t k = 0; k < a.heads.size(); ++k)
        if (a.heads[k].mu != b.heads[k].mu || a.heads[k].log_sigma != b.heads[k].log_sigma)
            return false;
    return a.trained_heads == b.trained_heads;
}

}  // namespace

TEST_CASE("run_vcl base case: one task, 1x1 matrices") {
    const auto split = synthetic_split("solo", 3, 8.0, 0.5);
    const TaskSequence seq = make_sequence({split}, {0});
    const auto rec = run_vcl(seq, {16, 16}, fast_hyper(), 5);
    CHECK(rec.val_acc.tasks_seen() == 1);
    CHECK(rec.test_acc.tasks_seen() == 1);
    CHECK(average_accuracy(rec.val_acc, 1) == rec.val_acc.at(1, 1));
    CHECK(rec.val_acc.at(1, 1) > 0.9);
    CHECK(rec.final_posterior.trained_heads == std::set<std::size_t>{0});
    CHECK(rec.checkpoints.empty());
}

TEST_CASE("run_vcl on two copies of the same task forgets nothing") {
    const auto split = synthetic_split("twin", 4, 8.0, 0.5);
    SplitDataset copy = split;
    copy.name = "twin2";
    const TaskSequence seq = make_sequence({split, copy}, {0, 1});
    const auto rec = run_vcl(seq, {16, 16}, fast_hyper(), 6);
    CHECK(rec.test_acc.tasks_seen() == 2);
    const double a11 = rec.test_acc.at(1, 1);
    const double a21 = rec.test_acc.at(2, 1);
    INFO("a11 = ", a11, ", a21 = ", a21);
    CHECK(std::fabs(a21 - a11) <= 0.05);
}

TEST_CASE("run_vcl is deterministic and honors keep_checkpoints") {
    const auto s1 = synthetic_split("a", 7, 4.0, 1.0);
    const auto s2 = synthetic_split("b", 8, 4.0, 1.0);
    const TaskSequence seq = make_sequence({s1, s2}, {0, 1});
    HyperParams h = fast_hyper();
    h.epochs = 10;

    const auto r1 = run_vcl(seq, {8}, h, 11, 0, true);
    const auto r2 = run_vcl(seq, {8}, h, 11, 0, true);
    CHECK(r1.val_acc.rows == r2.val_acc.rows);
    CHECK(r1.test_acc.rows == r2.test_acc.rows);
    CHECK(posterior_equal(r1.final_posterior, r2.final_posterior));
    REQUIRE(r1.checkpoints.size() == 2);
    CHECK(posterior_equal(r1.checkpoints[1], r1.final_posterior));
    CHECK(posterior_equal(r1.checkpoints[0], r2.checkpoints[0]));

    const auto r3 = run_vcl(seq, {8}, h, 12, 0);
    CHECK(!posterior_equal(r1.final_posterior, r3.final_posterior));

    // distinct stream salts decorrelate otherwise identical runs
    const auto r4 = run_vcl(seq, {8}, h, 11, 99);
    CHECK(!posterior_equal(r1.final_posterior, r4.final_posterior));
}

TEST_CASE("train_reference on separable and noise tasks") {
    HyperParams h = fast_hyper();
    h.epochs = 80;

    const auto separable = synthetic_split("sep", 9, 10.0, 0.5);
    const GridSpec singleton{{0.01}, {0.01}};
    const auto ref = train_reference(separable, {16, 16}, singleton, h, 21);
    CHECK(ref.test_accuracy > 0.95);
    CHECK(ref.learning_rate == 0.01);
    CHECK(ref.beta == 0.01);

    const auto noise = synthetic_split("noise", 10, 0.0, 1.0, 2, 250);
    HyperParams hn = fast_hyper();
    hn.epochs = 30;
    const GridSpec small{{0.005, 0.01}, {0.1}};
    const auto ref_noise = train_reference(noise, {16}, small, hn, 22);
    INFO("noise-task reference accuracy = ", ref_noise.test_accuracy);
    CHECK(ref_noise.test_accuracy > 0.35);
    CHECK(ref_noise.test_accuracy < 0.65);

    const auto ref_again = train_reference(separable, {16, 16}, singleton, h, 21);
    CHECK(ref.val_accuracy == ref_again.val_accuracy);
    CHECK(ref.test_accuracy == ref_again.test_accuracy);
}

TEST_CASE("grid_search structure, argmin contract and determinism") {
    const auto s1 = synthetic_split("g1", 13, 5.0, 1.0);
    const auto s2 = synthetic_split("g2", 14, 5.0, 1.0);
    const TaskSequence seq = make_sequence({s1, s2}, {0, 1});

    HyperParams base = fast_hyper();
    base.epochs = 15;
    const GridSpec grid{{0.005, 0.01}, {0.01, 0.5}};

    const GridResult res = grid_search(seq, {8}, grid, base, 31);
    CHECK(res.cells.size() == 4);
    CHECK(res.references.size() == 2);
    REQUIRE(res.best.size() == 2);

    // cells are ordered lr-major ascending
    CHECK(res.cells[0].learning_rate == 0.005);
    CHECK(res.cells[0].beta == 0.01);
    CHECK(res.cells[1].beta == 0.5);
    CHECK(res.cells[3].learning_rate == 0.01);

    // per-k best is the argmin of the combined metric across cells
    for (const auto& row : res.best) {
        for (const auto& cell : res.cells) {
            const double a = average_accuracy(cell.val_acc, row.k);
            const double f = forget(cell.val_acc, row.k).average;
            const double i =
                intransigence(res.references[row.k - 1].val_accuracy, cell.val_acc, row.k);
            CHECK(row.combined <= combined_metric(a, f, i) + 1e-12);
        }
        CHECK(row.combined ==
              doctest::Approx(combined_metric(row.average_acc, row.forget_avg,
                                              row.intransig))
                  .epsilon(1e-12));
    }

    // deterministic across invocations (cells run under OpenMP)
    const GridResult res2 = grid_search(seq, {8}, grid, base, 31);
    for (std::size_t c = 0; c < res.cells.size(); ++c) {
        CHECK(res.cells[c].val_acc.rows == res2.cells[c].val_acc.rows);
        CHECK(res.cells[c].test_acc.rows == res2.cells[c].test_acc.rows);
    }
    for (std::size_t k = 0; k < res.best.size(); ++k) {
        CHECK(res.best[k].learning_rate == res2.best[k].learning_rate);
        CHECK(res.best[k].beta == res2.best[k].beta);
        CHECK(res.best[k].combined == res2.best[k].combined);
    }
}

TEST_CASE("grid_search with a singleton grid selects that cell for every k") {
    const auto s1 = synthetic_split("s1", 15, 6.0, 0.8);
    const TaskSequence seq = make_sequence({s1}, {0});
    HyperParams base = fast_hyper();
    base.epochs = 20;
    const GridSpec grid{{0.01}, {0.1}};
    const GridResult res = grid_search(seq, {8}, grid, base, 41);
    CHECK(res.cells.size() == 1);
    REQUIRE(res.best.size() == 1);
    CHECK(res.best[0].learning_rate == 0.01);
    CHECK(res.best[0].beta == 0.1);
}

TEST_CASE("grid spec validation") {
    CHECK_THROWS_AS(GridSpec({}, {0.1}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec({0.01}, {}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec({-0.01}, {0.1}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec({0.01}, {1.5}).validate(), std::invalid_argument);
    GridSpec::defaults().validate();
    CHECK(GridSpec::defaults().learning_rates.size() == 5);
    CHECK(GridSpec::defaults().betas.size() == 6);
}
