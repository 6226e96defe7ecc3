#pragma once

#include <cstddef>
#include <vector>

namespace bvcl {

// Lower-triangular accuracies a_{k,j}: accuracy on task j after training
// through task k, for 1 <= j <= k <= K. Indices are 1-based to match the
// formulas the metrics implement.
struct AccuracyMatrix {
    std::vector<std::vector<double>> rows;  // rows[k-1] holds a_{k,1..k}

    std::size_t tasks_seen() const { return rows.size(); }
    void append_row(std::vector<double> row);
    double at(std::size_t k, std::size_t j) const;
};

// A_k: mean of row k.
double average_accuracy(const AccuracyMatrix& m, std::size_t k);

struct ForgetResult {
    std::vector<double> per_task;  // f_j^k for j = 1..k-1
    double average = 0.0;          // F_k, divisor k
};

// f_j^k = max_{l in {j..k-1}} a_{l,j} - a_{k,j}; F_k averages the k-1 values
// with divisor k. F_1 = 0 by convention.
ForgetResult forget(const AccuracyMatrix& m, std::size_t k);

// F: mean of F_k over k = 1..K.
double aggregate_forget(const AccuracyMatrix& m);

// I_k = a*_k - a_{k,k}; negative when the task benefits from transfer.
double intransigence(double a_star, const AccuracyMatrix& m, std::size_t k);

double combined_metric(double a_k, double f_k, double i_k);

struct MetricsReport {
    std::vector<double> average_acc;  // A_k per k
    std::vector<double> forget_avg;   // F_k per k
    std::vector<double> intransig;    // I_k per k
    std::vector<double> combined;     // (1-A_k)+F_k+I_k per k
    double aggregate_f = 0.0;
    std::vector<double> a_star;
};

MetricsReport build_report(const AccuracyMatrix& m, const std::vector<double>& a_star);

}  // namespace bvcl
