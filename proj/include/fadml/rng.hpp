#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fadml {

// All randomness in the project flows through these helpers so that results
// are bit-reproducible across platforms and thread counts. std::mt19937_64 is
// fully specified by the standard; the distributions are not, so we roll the
// few we need from raw engine output.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent stream id from a seed plus any number of indices.
template <typename... Ids>
std::uint64_t derive_seed(std::uint64_t seed, Ids... ids) {
    std::uint64_t h = splitmix64(seed);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(ids))), ...);
    return h;
}

class rng {
public:
    explicit rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1) with 53 bits of mantissa
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    float next_float() {
        return static_cast<float>(engine_() >> 40) * 0x1.0p-24f;
    }

    // uniform in [lo, hi)
    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n); n must be > 0. Slight modulo bias is
    // irrelevant here (n is always tiny against 2^64) and keeps the
    // consumption pattern fixed at one draw per call.
    std::uint64_t next_below(std::uint64_t n) { return engine_() % n; }

    // Marsaglia polar method; consumption pattern depends only on the draws,
    // which are themselves deterministic.
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return mean + stddev * u * m;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Fisher-Yates with our own bounded draw, so shuffles are identical on every
// standard library implementation.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, rng& r) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(r.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace fadml
