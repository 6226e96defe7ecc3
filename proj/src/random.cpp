#include "bvcl/random.hpp"

namespace bvcl {

std::vector<double> draw_normal(RandomStream& rs, std::size_t n) {
    std::vector<double> out(n);
    const std::uint64_t base = rs.counter();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        out[static_cast<std::size_t>(i)] =
            rs.normal_at(base + 2 * static_cast<std::uint64_t>(i));
    }
    rs.skip(2 * static_cast<std::uint64_t>(n));
    return out;
}

}  // namespace bvcl
