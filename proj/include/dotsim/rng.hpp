#pragma once

#include <cmath>
#include <cstdint>

namespace dotsim {

/// Counter-seeded splitmix64 stream. Used instead of <random> engines so that
/// simulated data is bit-identical across compilers and platforms. Streams
/// derived from (seed, index) are independent, which keeps Monte-Carlo
/// results deterministic under any parallel schedule.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    static Rng stream(uint64_t seed, uint64_t index) {
        Rng r(seed ^ (0x632be59bd9b4e019ULL * (index + 1)));
        r.next();
        return r;
    }

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}
