#include "udc/scatter.hpp"

#include <algorithm>
#include <cmath>

#include "udc/convolve.hpp"

namespace udc {

ScatteringParams ScatteringParams::from_alpha(double alpha, double m) {
    ScatteringParams p;
    p.alpha = alpha;
    p.m = m;
    p.validate();
    return p;
}

ScatteringParams ScatteringParams::from_beta_d(double beta, double d, double m) {
    ScatteringParams p;
    p.alpha = alpha_from_beta_d(beta, d);
    p.m = m;
    p.beta = beta;
    p.d = d;
    p.validate();
    return p;
}

void ScatteringParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("alpha must be in (0,1], got " + std::to_string(alpha));
    }
    if (!(m >= 0.0) || !std::isfinite(m)) {
        throw std::invalid_argument("m must be finite and >= 0, got " + std::to_string(m));
    }
    if (beta.has_value() != d.has_value()) {
        throw std::invalid_argument("beta and d must be given together");
    }
    if (beta) {
        if (std::abs(alpha - std::exp(-(*beta) * (*d))) >= 1e-12) {
            throw std::invalid_argument("alpha inconsistent with exp(-beta*d)");
        }
    }
}

double alpha_from_beta_d(double beta, double d) {
    if (!(beta >= 0.0) || !std::isfinite(beta) || !(d >= 0.0) || !std::isfinite(d)) {
        throw std::invalid_argument("beta and d must be finite and >= 0");
    }
    return std::exp(-beta * d);
}

HdrImage scatter_forward(const HdrImage& img, const ScatteringParams& p) {
    p.validate();
    HdrImage out(img.height(), img.width());
    const double veil = p.m * (1.0 - p.alpha);
    const double* src = img.data();
    double* dst = out.data();
    for (size_t i = 0; i < img.sample_count(); ++i) {
        dst[i] = p.alpha * src[i] + veil;
    }
    return out;
}

HdrImage scatter_inverse(const HdrImage& img, const ScatteringParams& p) {
    p.validate();
    HdrImage out(img.height(), img.width());
    const double veil = p.m * (1.0 - p.alpha);
    const double* src = img.data();
    double* dst = out.data();
    for (size_t i = 0; i < img.sample_count(); ++i) {
        dst[i] = std::max(0.0, (src[i] - veil) / p.alpha);
    }
    return out;
}

double compute_m(const HdrImage& img, const GrayWeights& w) {
    return plane_mean(to_grayscale(img, w));
}

double sample_alpha(SplitMix64& rng, double lo, double hi) {
    if (!(lo > 0.0 && hi <= 1.0 && lo <= hi)) {
        throw std::invalid_argument("alpha range must satisfy 0 < lo <= hi <= 1");
    }
    return rng.uniform(lo, hi);
}

ParamEstimate estimate_params(const HdrImage& degraded_lin, const HdrImage& clean,
                              const PsfKernel& k) {
    if (degraded_lin.height() != clean.height() || degraded_lin.width() != clean.width()) {
        throw std::invalid_argument("degraded and clean images must have the same size");
    }
    HdrImage predictor = convolve_fft(clean, k);

    const double* p = predictor.data();
    const double* y = degraded_lin.data();
    const size_t n = predictor.sample_count();

    // Two-pass centered regression of y on (predictor, 1).
    double pm = 0.0, ym = 0.0;
    {
        double cp = 0.0, cy = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double t = p[i] - cp, s = pm + t;
            cp = (s - pm) - t;
            pm = s;
            t = y[i] - cy;
            s = ym + t;
            cy = (s - ym) - t;
            ym = s;
        }
        pm /= static_cast<double>(n);
        ym /= static_cast<double>(n);
    }
    double spp = 0.0, spy = 0.0, sy2 = 0.0, sp2_for_scale = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dp = p[i] - pm, dy = y[i] - ym;
        spp += dp * dp;
        spy += dp * dy;
        sy2 += dy * dy;
        sp2_for_scale += p[i] * p[i];
    }
    // Constant predictor: the slope column is linearly dependent on the
    // intercept column.
    if (!(spp > 0.0) || spp <= 1e-12 * sp2_for_scale) {
        throw UnidentifiableError("predictor is spatially constant; (alpha, m) unidentifiable");
    }

    ParamEstimate est;
    est.alpha = spy / spp;
    double intercept = ym - est.alpha * pm;
    double ss_res = std::max(0.0, sy2 - est.alpha * est.alpha * spp);
    est.residual_rms = std::sqrt(ss_res / static_cast<double>(n));
    if (1.0 - est.alpha < 1e-6) {
        est.m = 0.0;
        est.m_valid = false;
    } else {
        est.m = intercept / (1.0 - est.alpha);
        est.m_valid = true;
    }
    return est;
}

}  // namespace udc
