#pragma once

#include <span>
#include <vector>

namespace bvcl {

// log(sum(exp(v))) via max-shift; safe for large magnitudes and -inf entries.
double logsumexp(std::span<const double> v);

// Stable softmax; entries in (0,1], sums to 1.
std::vector<double> softmax(std::span<const double> v);

// Regularized lower incomplete gamma P(a, x); series for x < a+1,
// continued fraction otherwise.
double reg_lower_incomplete_gamma(double a, double x);

// Standard normal CDF.
double standard_normal_cdf(double x);

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_asymptotic_sf(double lambda);

// Chi-squared CDF with df degrees of freedom.
double chi_squared_cdf(double x, int df);

}  // namespace bvcl
