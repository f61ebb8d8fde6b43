#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace apogee {

/// Counter-based splittable random stream.
///
/// Each stream is keyed by (master_seed, stream_id) and is statistically
/// independent of every other stream, so work items can be farmed out to
/// any number of threads and still reproduce bit-identical results: sample
/// i always draws from stream (seed, i) regardless of which thread runs it.
///
/// The generator is splitmix64; all distributions below are hand-rolled so
/// sequences do not depend on the standard library's unspecified
/// distribution algorithms.
class RngStream {
public:
    RngStream(uint64_t master_seed, uint64_t stream_id) {
        uint64_t s = master_seed;
        uint64_t k = mix(s); // advance + hash the master seed
        state_ = k ^ (stream_id * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
        // burn one output so nearby stream ids decorrelate fully
        next_u64();
    }

    uint64_t next_u64() { return mix(state_); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t mix(uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t state_ = 0;
};

// Stream-id blocks reserved by the training pipeline. Dataset generation
// uses ids [0, n); everything else lives above 2^40 so they never collide.
namespace stream_id {
inline constexpr uint64_t kValidationSplit = uint64_t{1} << 40;
inline constexpr uint64_t kBootstrapBase = uint64_t{2} << 40;
inline constexpr uint64_t kInitBase = uint64_t{3} << 40;
inline constexpr uint64_t kTrainBase = uint64_t{4} << 40;
} // namespace stream_id

} // namespace apogee
