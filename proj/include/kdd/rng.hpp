#pragma once

#include <cstdint>
#include <cmath>

namespace kdd {

// Seeded PRNG used for every random draw in the library.
//
// The core is splitmix64 (Steele/Lea/Flood; Vigna's reference mixer): the
// state advances by a fixed odd constant and each output is a bijective mix
// of the state. This is the repo-wide generator; golden tests pin its stream,
// so the constants below must never change.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

    // Standard normal via Box-Muller. Consumes exactly two uniforms and keeps
    // no cached spare, so the stream position is a pure function of call count.
    double normal() {
        const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Independent stream keyed by id. Derivation is a mix of the current
    // state with a per-id constant, so streams with distinct ids never
    // interleave no matter how much either is consumed.
    Rng derive(std::uint64_t stream_id) const {
        return Rng(mix(state_ ^ (0xD1B54A32D192ED03ULL * (stream_id + 1))));
    }

    std::uint64_t state() const { return state_; }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace kdd
