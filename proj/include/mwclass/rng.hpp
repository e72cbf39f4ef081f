#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mwclass {

// Mixes a seed with up to three stream tags into an independent engine seed.
// Splitmix64 finalizer applied to each word keeps streams decorrelated, so
// tasks (replicates, folds, resamples, restarts) can draw independently of
// worker scheduling.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t a = 0,
                               std::uint64_t b = 0, std::uint64_t c = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t s = mix(seed);
    s = mix(s ^ mix(a + 0x100ULL));
    s = mix(s ^ mix(b + 0x200ULL));
    s = mix(s ^ mix(c + 0x300ULL));
    return s;
}

// Seeded random source built on mt19937_64 (fully specified by the standard,
// so sequences are identical across platforms).  Uniform and normal variates
// are generated by hand rather than with <random> distributions, whose
// algorithms are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; caches the paired variate.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = eng_();
        } while (r >= bound);
        return r % n;
    }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mwclass
