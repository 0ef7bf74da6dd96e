#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dnmx/core/hash.hpp"

namespace dnmx {

/// mt19937_64 with explicit value mappings. The std distributions are not
/// specified bit-for-bit across standard libraries; these are.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform in [0, n); n == 0 returns 0.
    std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }

    /// Uniform integer in [lo, hi].
    long long range(long long lo, long long hi) {
        return lo + static_cast<long long>(below(static_cast<std::size_t>(hi - lo + 1)));
    }

    bool chance(double p) { return uniform() < p; }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

/// Uniform [0,1) value for the index-th draw of a seeded stream, without
/// holding state. Used where replay by index matters.
inline double indexed_uniform(std::uint64_t seed, std::uint64_t index) {
    return static_cast<double>(mix_seed(mix_seed(seed) ^ index) >> 11) * 0x1.0p-53;
}

} // namespace dnmx
