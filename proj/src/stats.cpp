#include "bvcl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bvcl/error.hpp"
#include "bvcl/special.hpp"

namespace bvcl {

TestResult ks_normality(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 8) throw std::invalid_argument("ks_normality: need at least 8 samples");

    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : sample) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    if (var <= 0.0)
        throw DegenerateInputError("ks_normality: zero sample variance");
    const double sd = std::sqrt(var);

    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = standard_normal_cdf((sorted[i] - mean) / sd);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - phi;
        const double lo = phi - static_cast<double>(i) / static_cast<double>(n);
        d_stat = std::max({d_stat, hi, lo});
    }

    TestResult r;
    r.statistic = d_stat;
    r.p_value = kolmogorov_asymptotic_sf(std::sqrt(static_cast<double>(n)) * d_stat);
    r.group_sizes = {n};
    return r;
}

TestResult kruskal_wallis(std::span<const double> group_a, std::span<const double> group_b) {
    const std::size_t na = group_a.size();
    const std::size_t nb = group_b.size();
    if (na == 0 || nb == 0)
        throw std::invalid_argument("kruskal_wallis: both groups must be non-empty");
    const std::size_t n = na + nb;
    if (n < 5) throw std::invalid_argument("kruskal_wallis: need a combined n of at least 5");

    struct Entry {
        double value;
        bool in_a;
    };
    std::vector<Entry> all;
    all.reserve(n);
    for (double v : group_a) all.push_back({v, true});
    for (double v : group_b) all.push_back({v, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& x, const Entry& y) { return x.value < y.value; });

    // mid-ranks with tie correction 1 - sum(t^3 - t) / (N^3 - N)
    double rank_a = 0.0;
    double tie_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && all[j].value == all[i].value) ++j;
        const double t = static_cast<double>(j - i);
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (all[k].in_a) rank_a += mid_rank;
        tie_sum += t * t * t - t;
        i = j;
    }
    const double nn = static_cast<double>(n);
    const double correction = 1.0 - tie_sum / (nn * nn * nn - nn);
    if (correction <= 0.0)
        throw DegenerateInputError("kruskal_wallis: all values tied across both groups");

    const double rank_b = nn * (nn + 1.0) / 2.0 - rank_a;
    double h = 12.0 / (nn * (nn + 1.0)) *
                   (rank_a * rank_a / static_cast<double>(na) +
                    rank_b * rank_b / static_cast<double>(nb)) -
               3.0 * (nn + 1.0);
    h /= correction;
    if (h < 0.0 && h > -1e-12) h = 0.0;  // rounding around the all-equal case

    TestResult r;
    r.statistic = h;
    r.df = 1;
    r.p_value = 1.0 - chi_squared_cdf(h, 1);
    r.group_sizes = {na, nb};
    return r;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SeparationResult uncertainty_separation(const std::vector<UncertaintyRecord>& records,
                                        UncertaintyMeasure measure) {
    std::vector<double> correct, wrong;
    for (const auto& rec : records) {
        const double v = measure == UncertaintyMeasure::Entropy ? rec.entropy
                                                                : rec.mutual_information;
        (rec.correct ? correct : wrong).push_back(v);
    }
    if (correct.empty())
        throw DataError("uncertainty_separation: insufficient data: no correct predictions");
    if (wrong.empty())
        throw DataError("uncertainty_separation: insufficient data: no wrong predictions");

    SeparationResult out;
    out.n_correct = correct.size();
    out.n_wrong = wrong.size();
    auto gated_ks = [](const std::vector<double>& g) -> std::optional<TestResult> {
        if (g.size() < 8) return std::nullopt;
        try {
            return ks_normality(g);
        } catch (const DegenerateInputError&) {
            return std::nullopt;
        }
    };
    out.ks_correct = gated_ks(correct);
    out.ks_wrong = gated_ks(wrong);
    out.kw = kruskal_wallis(wrong, correct);
    out.median_correct = median_of(correct);
    out.median_wrong = median_of(wrong);
    return out;
}

}  // namespace bvcl
