#pragma once

// Counter-based random streams for reproducible Monte Carlo.
//
// Each simulated path owns an independent stream keyed by (seed, path index),
// and each draw is a pure function of (stream key, draw counter). That makes
// every path's noise sequence independent of scheduling: workers may pick up
// paths in any order and the estimator is still bitwise reproducible.
//
// The mixer is the SplitMix64 finalizer, which passes standard statistical
// batteries and is more than adequate for diffusion-path noise.

#include <cstdint>
#include <cmath>

namespace refract::detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64(splitmix64(seed) ^ (stream * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() { return splitmix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform on (0, 1] — never returns 0, safe under log().
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second member of each pair is
    /// cached, so consecutive calls cost one transcendental pair per two draws.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform_pos();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace refract::detail
