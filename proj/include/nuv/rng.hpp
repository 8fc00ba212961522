#pragma once

#include <cmath>
#include <cstdint>

namespace nuv {

/*
 * Deterministic 64-bit generator (splitmix64). The state advances by a
 * fixed odd constant and the output is a bijective mix of the counter,
 * so a stream is fully determined by its seed and the number of draws.
 * Normal deviates come from the Marsaglia polar transform with the
 * second value of each pair cached.
 *
 * Simulations derive one stream per work unit through derive_stream(),
 * which decorrelates (seed, index) pairs before seeding.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform on [0,1) with 53 random bits
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // uniform on {lo, ..., hi}, bias-free via rejection
    int uniform_int(int lo, int hi) {
        std::uint64_t n = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold)
                return lo + static_cast<int>((r - threshold) % n);
        }
    }

    // standard normal deviate
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_stream(std::uint64_t master, std::uint64_t index) {
        return mix(master ^ mix(index + 0x9E3779B97F4A7C15ull));
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace nuv
