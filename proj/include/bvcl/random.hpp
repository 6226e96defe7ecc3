#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace bvcl {

// Counter-based random stream. Output at counter position i is a pure
// function of (seed, stream_id, i), so streams can be copied to replay a
// sequence and elements can be generated out of order or in parallel.
// Distinct stream ids give independent sequences; a single stream must not
// be drawn from concurrently.
class RandomStream {
  public:
    RandomStream() : RandomStream(0, 0) {}
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id), counter_(0) {
        key_ = mix64(mix64(seed ^ 0x243f6a8885a308d3ULL) + stream_id);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }

    // Raw 64-bit output at an absolute counter position; does not advance.
    std::uint64_t raw_at(std::uint64_t ctr) const {
        return mix64(key_ ^ mix64(ctr * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL));
    }

    std::uint64_t next_u64() { return raw_at(counter_++); }

    // Uniform in (0, 1]; never returns 0 so log() is safe.
    double next_unit() { return to_unit(next_u64()); }

    // Standard normal via Box-Muller; consumes exactly two counter ticks.
    double next_normal() {
        const double z = normal_from(raw_at(counter_), raw_at(counter_ + 1));
        counter_ += 2;
        return z;
    }

    // Normal at an absolute tick pair (2 ticks starting at ctr); does not advance.
    double normal_at(std::uint64_t ctr) const {
        return normal_from(raw_at(ctr), raw_at(ctr + 1));
    }

    // Uniform integer in [0, n); one tick. n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    void skip(std::uint64_t ticks) { counter_ += ticks; }

    // Independent substream; deterministic function of (this stream, salt).
    RandomStream derive(std::uint64_t salt) const {
        return RandomStream(seed_, mix64(stream_id_ + 0x9e3779b97f4a7c15ULL) ^
                                       mix64(salt + 0xbf58476d1ce4e5b9ULL));
    }

    static std::uint64_t mix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

  private:
    static double to_unit(std::uint64_t x) {
        return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
    }

    static double normal_from(std::uint64_t a, std::uint64_t b) {
        const double u1 = to_unit(a);
        const double u2 = to_unit(b);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_;
    std::uint64_t key_;
};

// n i.i.d. standard normal variates; advances the stream by 2n ticks.
std::vector<double> draw_normal(RandomStream& rs, std::size_t n);

}  // namespace bvcl
