#include "udc/noise.hpp"

#include <algorithm>

#include "udc/rng.hpp"

namespace udc {

HdrImage add_noise(const HdrImage& img, const NoiseSpec& spec) {
    if (spec.sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    HdrImage out = img;
    if (spec.sigma == 0.0) return out;
    GaussianStream gauss(spec.seed);
    double* p = out.data();
    for (size_t i = 0; i < out.sample_count(); ++i) {
        p[i] = std::max(0.0, p[i] + spec.sigma * gauss.next());
    }
    return out;
}

}  // namespace udc
