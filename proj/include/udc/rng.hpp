#pragma once

#include <cmath>
#include <cstdint>

namespace udc {

/// SplitMix64 (Steele/Lea/Vigna). State advances by the golden-gamma
/// increment and is finalized with two xor-multiply rounds. Fully defined
/// here so that a seed reproduces the same stream on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    uint64_t state_;
};

/// SplitMix64 finalizer as a standalone hash.
inline uint64_t splitmix64_hash(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Combines a seed with one component of a split index. Chaining calls
/// derives independent per-record seeds from a master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t component) {
    return splitmix64_hash(seed ^ (0x9E3779B97F4A7C15ULL * (component + 1)));
}

/// One Box-Muller draw: two independent standard normals from two uniforms.
/// u1 is taken in (0,1] so the log never sees zero.
struct GaussianPair {
    double z0;
    double z1;
};

inline GaussianPair gaussian_pair(SplitMix64& rng) {
    double u1 = (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = rng.uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * 3.14159265358979323846 * u2;
    return {r * std::cos(t), r * std::sin(t)};
}

/// Streams standard normals, consuming the underlying generator two
/// uniforms at a time.
class GaussianStream {
public:
    explicit GaussianStream(uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        GaussianPair p = gaussian_pair(rng_);
        spare_ = p.z1;
        have_spare_ = true;
        return p.z0;
    }

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace udc
