#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace ovb {

// Splittable counter-free stream built on splitmix64 (Steele, Lea & Flood,
// "Fast splittable pseudorandom number generators", OOPSLA 2014; fixed
// increment variant by Vigna). Streams are derived from an arbitrary key
// tuple so that (seed, rep, n, phase) addressing is stable no matter how
// work is scheduled across threads.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    // Folds every key word into the state through one mixing round each,
    // so nearby keys land in unrelated stream positions.
    static RngStream from_key(std::initializer_list<std::uint64_t> key) {
        std::uint64_t s = 0x9e3779b97f4a7c15ULL;
        for (std::uint64_t w : key) {
            s = mix(s + 0x9e3779b97f4a7c15ULL + w);
            s = mix(s);
        }
        return RngStream(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform draw on (0,1]; never returns exactly 0 so log(u) is safe.
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ovb
