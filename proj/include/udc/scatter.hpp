#pragma once

#include <optional>

#include "udc/image.hpp"
#include "udc/psf.hpp"
#include "udc/rng.hpp"

namespace udc {

/// Raised when a regression target cannot be identified from the data
/// (constant predictor, singular normal matrix).
class UnidentifiableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Global scattering state of the display: transmittance alpha in (0,1] and
/// the veiling-light level m >= 0 (linear radiance units). Optionally keeps
/// the (beta, d) provenance with alpha = exp(-beta*d).
struct ScatteringParams {
    double alpha = 1.0;
    double m = 0.0;
    std::optional<double> beta;
    std::optional<double> d;

    static ScatteringParams from_alpha(double alpha, double m);
    static ScatteringParams from_beta_d(double beta, double d, double m);

    /// Throws std::invalid_argument when any invariant is violated.
    void validate() const;
};

/// alpha = exp(-beta*d) for nonnegative finite beta, d. Always in (0,1].
double alpha_from_beta_d(double beta, double d);

/// Per-sample out = alpha*in + m*(1-alpha): the attenuated direct component
/// plus the veiling component.
HdrImage scatter_forward(const HdrImage& img, const ScatteringParams& p);

/// Algebraic inverse of scatter_forward: (in - m*(1-alpha)) / alpha, clamped
/// at zero. Requires alpha > 0.
HdrImage scatter_inverse(const HdrImage& img, const ScatteringParams& p);

/// Veiling level that preserves average brightness: the spatial mean of the
/// grayscale image.
double compute_m(const HdrImage& img, const GrayWeights& w = GrayWeights::rec601());

/// Uniform transmittance draw from [lo, hi).
double sample_alpha(SplitMix64& rng, double lo = 0.6, double hi = 0.9);

struct ParamEstimate {
    double alpha = 0.0;
    double m = 0.0;
    double residual_rms = 0.0;
    /// False when alpha is too close to 1 for m = c/(1-alpha) to be
    /// meaningful; alpha itself is still valid.
    bool m_valid = true;
};

/// Closed-form least-squares recovery of (alpha, m) from a pre-tone-map
/// degraded image and its clean counterpart. Regresses the degraded samples
/// against conv(clean, k) and a constant, jointly over all pixels and
/// channels, then maps the intercept to m = c/(1-alpha).
/// Throws UnidentifiableError when the predictor is spatially constant.
ParamEstimate estimate_params(const HdrImage& degraded_lin, const HdrImage& clean,
                              const PsfKernel& k);

}  // namespace udc
