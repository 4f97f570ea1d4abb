#pragma once

#include <cstdint>

#include "udc/image.hpp"

namespace udc {

/// Additive zero-mean Gaussian noise in linear radiance units.
struct NoiseSpec {
    double sigma = 0.0;
    uint64_t seed = 0;
};

/// Adds i.i.d. Gaussian(0, sigma^2) to every sample in memory order, then
/// clamps at zero. sigma == 0 returns the input unchanged. The stream is a
/// pure function of (img, sigma, seed): SplitMix64 + Box-Muller.
HdrImage add_noise(const HdrImage& img, const NoiseSpec& spec);

}  // namespace udc
