#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace enzkit {

// SplitMix64 finalizer; the workhorse for key mixing and stateless draws.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

inline std::uint64_t hash_str(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/**
 * Deterministic sequential generator (SplitMix64 stream). Hand-rolled so that
 * datasets, parameter initializations, and dropout masks are reproducible
 * independent of the standard library's distribution implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    int uniform_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates, deterministic for a given state.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Stateless uniform in [0,1) from a composite key; used for dropout masks so
// the decision for (seed, epoch, sample, layer, role, token, channel) does not
// depend on scheduling.
inline double keyed_uniform(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                            std::uint64_t k3, std::uint64_t k4, std::uint64_t k5,
                            std::uint64_t k6) {
    std::uint64_t h = splitmix64(k0);
    h = mix(h, k1);
    h = mix(h, k2);
    h = mix(h, k3);
    h = mix(h, k4);
    h = mix(h, k5);
    h = mix(h, k6);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace enzkit
