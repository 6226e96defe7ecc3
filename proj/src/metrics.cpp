#include "bvcl/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace bvcl {

void AccuracyMatrix::append_row(std::vector<double> row) {
    if (row.size() != rows.size() + 1)
        throw std::invalid_argument("accuracy matrix: row k must have k entries");
    for (double v : row)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("accuracy matrix: entries must be in [0,1]");
    rows.push_back(std::move(row));
}

double AccuracyMatrix::at(std::size_t k, std::size_t j) const {
    if (k < 1 || k > rows.size() || j < 1 || j > k)
        throw std::invalid_argument("accuracy matrix: index outside lower triangle");
    return rows[k - 1][j - 1];
}

double average_accuracy(const AccuracyMatrix& m, std::size_t k) {
    if (k < 1 || k > m.tasks_seen())
        throw std::invalid_argument("average_accuracy: k out of range");
    double acc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) acc += m.at(k, j);
    return acc / static_cast<double>(k);
}

ForgetResult forget(const AccuracyMatrix& m, std::size_t k) {
    if (k < 1 || k > m.tasks_seen()) throw std::invalid_argument("forget: k out of range");
    ForgetResult r;
    if (k == 1) return r;  // F_1 = 0
    double sum = 0.0;
    for (std::size_t j = 1; j < k; ++j) {
        double best = m.at(j, j);
        for (std::size_t l = j; l <= k - 1; ++l) best = std::max(best, m.at(l, j));
        const double f = best - m.at(k, j);
        r.per_task.push_back(f);
        sum += f;
    }
    r.average = sum / static_cast<double>(k);
    return r;
}

double aggregate_forget(const AccuracyMatrix& m) {
    const std::size_t k_count = m.tasks_seen();
    if (k_count == 0) throw std::invalid_argument("aggregate_forget: empty matrix");
    double acc = 0.0;
    for (std::size_t k = 1; k <= k_count; ++k) acc += forget(m, k).average;
    return acc / static_cast<double>(k_count);
}

double intransigence(double a_star, const AccuracyMatrix& m, std::size_t k) {
    return a_star - m.at(k, k);
}

double combined_metric(double a_k, double f_k, double i_k) {
    return (1.0 - a_k) + f_k + i_k;
}

MetricsReport build_report(const AccuracyMatrix& m, const std::vector<double>& a_star) {
    const std::size_t k_count = m.tasks_seen();
    if (a_star.size() != k_count)
        throw std::invalid_argument("build_report: need one reference accuracy per task");
    MetricsReport rep;
    rep.a_star = a_star;
    for (std::size_t k = 1; k <= k_count; ++k) {
        const double a = average_accuracy(m, k);
        const double f = forget(m, k).average;
        const double i = intransigence(a_star[k - 1], m, k);
        rep.average_acc.push_back(a);
        rep.forget_avg.push_back(f);
        rep.intransig.push_back(i);
        rep.combined.push_back(combined_metric(a, f, i));
    }
    rep.aggregate_f = aggregate_forget(m);
    return rep;
}

}  // namespace bvcl
