#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bvcl/inference.hpp"

namespace bvcl {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int df = 0;                          // Kruskal-Wallis only
    std::vector<std::size_t> group_sizes;
};

// Kolmogorov-Smirnov test of normality with sample-estimated mean/std.
// D = sup |F_emp - Phi((x - m)/s)|; p from the asymptotic Kolmogorov
// distribution at sqrt(n) * D (anti-conservative with estimated parameters;
// used as a gate only).
TestResult ks_normality(std::span<const double> sample);

// Two-group Kruskal-Wallis with mid-ranks and the classical tie correction;
// p from the chi-squared distribution with df = 1.
TestResult kruskal_wallis(std::span<const double> group_a, std::span<const double> group_b);

enum class UncertaintyMeasure { Entropy, MutualInformation };

struct SeparationResult {
    TestResult kw;                      // wrong vs. correct
    std::optional<TestResult> ks_correct;
    std::optional<TestResult> ks_wrong;  // absent when a group is too small/degenerate
    double median_correct = 0.0;
    double median_wrong = 0.0;
    std::size_t n_correct = 0;
    std::size_t n_wrong = 0;
};

// Compares the chosen uncertainty measure between wrongly and correctly
// classified samples: KS normality per group, then Kruskal-Wallis.
SeparationResult uncertainty_separation(const std::vector<UncertaintyRecord>& records,
                                        UncertaintyMeasure measure);

}  // namespace bvcl
