#include "bvcl/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bvcl {

double logsumexp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("logsumexp: empty vector");
    const double m = *std::max_element(v.begin(), v.end());
    if (std::isinf(m) && m < 0) return m;  // all entries -inf
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("softmax: empty vector");
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        acc += out[i];
    }
    for (double& x : out) x /= acc;
    return out;
}

namespace {

// Series expansion of P(a,x), valid and fast for x < a+1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) via modified Lentz, valid for x >= a+1.
double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double reg_lower_incomplete_gamma(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("reg_lower_incomplete_gamma: a must be > 0");
    if (!(x >= 0.0)) throw std::invalid_argument("reg_lower_incomplete_gamma: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return std::min(1.0, gamma_p_series(a, x));
    return std::clamp(1.0 - gamma_q_contfrac(a, x), 0.0, 1.0);
}

double standard_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double kolmogorov_asymptotic_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double chi_squared_cdf(double x, int df) {
    if (df < 1) throw std::invalid_argument("chi_squared_cdf: df must be >= 1");
    if (x <= 0.0) return 0.0;
    return reg_lower_incomplete_gamma(0.5 * df, 0.5 * x);
}

}  // namespace bvcl
