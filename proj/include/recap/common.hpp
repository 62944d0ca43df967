#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace recap {

#ifdef RECAP_USE_FLOAT32
using Real = float;
#else
using Real = double;
#endif

inline constexpr const char* real_name() {
#ifdef RECAP_USE_FLOAT32
    return "float32";
#else
    return "float64";
#endif
}

// Deterministic RNG wrapper. All randomness in the project flows through
// this type so that results are a pure function of the seed. The gaussian
// and uniform mappings are hand-rolled (std::normal_distribution is
// implementation-defined and would tie outputs to the standard library).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // standard normal via Box-Muller
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace recap
