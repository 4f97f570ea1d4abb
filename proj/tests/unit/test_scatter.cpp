#include <doctest.h>

#include <cmath>

#include "udc/convolve.hpp"
#include "udc/scatter.hpp"

using namespace udc;

namespace {

HdrImage random_hdr(int h, int w, uint64_t seed, double scale = 1.0) {
    SplitMix64 rng(seed);
    HdrImage img(h, w);
    for (size_t i = 0; i < img.sample_count(); ++i) img.data()[i] = scale * rng.uniform01();
    return img;
}

}  // namespace

TEST_CASE("alpha_from_beta_d matches an independently computed exponential") {
    // exp(-0.357) evaluated separately and frozen here.
    CHECK(alpha_from_beta_d(0.357, 1.0) == doctest::Approx(0.69977249773461103).epsilon(1e-15));
    CHECK(alpha_from_beta_d(0.0, 5.0) == 1.0);
    CHECK(alpha_from_beta_d(0.1, 0.0) == 1.0);
    CHECK_THROWS_AS(alpha_from_beta_d(-0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(alpha_from_beta_d(0.1, -1.0), std::invalid_argument);
}

TEST_CASE("from_beta_d keeps provenance consistent") {
    ScatteringParams p = ScatteringParams::from_beta_d(0.357, 1.0, 0.4);
    CHECK(p.alpha == doctest::Approx(0.69977249773461103).epsilon(1e-15));
    REQUIRE(p.beta.has_value());
    REQUIRE(p.d.has_value());
    CHECK(*p.beta == 0.357);
    CHECK_NOTHROW(p.validate());

    p.alpha = 0.5;  // now inconsistent with exp(-beta*d)
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("parameter validation rejects out-of-range values") {
    CHECK_THROWS_AS(ScatteringParams::from_alpha(0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(ScatteringParams::from_alpha(1.2, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(ScatteringParams::from_alpha(-0.5, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(ScatteringParams::from_alpha(0.7, -0.1), std::invalid_argument);
    CHECK_NOTHROW(ScatteringParams::from_alpha(1.0, 0.0));
}

TEST_CASE("scatter forward applies out = alpha*in + m*(1-alpha)") {
    ScatteringParams p = ScatteringParams::from_alpha(0.75, 0.4);
    HdrImage img(1, 2);
    img.at(0, 0, 0) = 1.0;
    img.at(0, 1, 1) = 0.2;
    HdrImage out = scatter_forward(img, p);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.75 + 0.4 * 0.25).epsilon(1e-15));
    CHECK(out.at(0, 1, 1) == doctest::Approx(0.75 * 0.2 + 0.1).epsilon(1e-15));
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("scatter inverse undoes the forward map") {
    ScatteringParams p = ScatteringParams::from_alpha(0.62, 0.35);
    HdrImage img = random_hdr(9, 13, 21);
    HdrImage back = scatter_inverse(scatter_forward(img, p), p);
    for (size_t i = 0; i < img.sample_count(); ++i)
        CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-12));
}

TEST_CASE("scatter at alpha=1 is the identity") {
    ScatteringParams p = ScatteringParams::from_alpha(1.0, 0.9);
    HdrImage img = random_hdr(5, 5, 22);
    HdrImage out = scatter_forward(img, p);
    for (size_t i = 0; i < img.sample_count(); ++i) CHECK(out.data()[i] == img.data()[i]);
}

TEST_CASE("scattering with m = image mean preserves the gray mean") {
    HdrImage img = random_hdr(16, 16, 23);
    double m = compute_m(img);
    ScatteringParams p = ScatteringParams::from_alpha(0.7, m);
    HdrImage out = scatter_forward(img, p);
    CHECK(compute_m(out) == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("compute_m is the rec601 gray mean") {
    HdrImage img(2, 1);
    img.at(0, 0, 0) = 1.0;  // pure red pixel
    img.at(1, 0, 1) = 1.0;  // pure green pixel
    CHECK(compute_m(img) == doctest::Approx((0.299 + 0.587) / 2.0).epsilon(1e-15));
}

TEST_CASE("sample_alpha stays inside [lo, hi) and covers it") {
    SplitMix64 rng(31);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double a = sample_alpha(rng);
        CHECK(a >= 0.6);
        CHECK(a < 0.9);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
        sum += a;
    }
    CHECK(lo < 0.605);
    CHECK(hi > 0.895);
    CHECK(sum / n == doctest::Approx(0.75).epsilon(0.01));
    CHECK_THROWS_AS(sample_alpha(rng, 0.0, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(sample_alpha(rng, 0.9, 0.6), std::invalid_argument);
}

TEST_CASE("estimator recovers exact parameters from noise-free data") {
    SplitMix64 meta(41);
    for (int trial = 0; trial < 10; ++trial) {
        HdrImage clean = random_hdr(32, 32, meta.next());
        PsfKernel k = gaussian_kernel(7, 0.6 + meta.uniform01());
        double alpha = 0.6 + 0.3 * meta.uniform01();
        double m = compute_m(clean);
        ScatteringParams p = ScatteringParams::from_alpha(alpha, m);
        HdrImage degraded = convolve_fft(scatter_forward(clean, p), k);
        ParamEstimate est = estimate_params(degraded, clean, k);
        CHECK(std::abs(est.alpha - alpha) < 1e-6);
        REQUIRE(est.m_valid);
        CHECK(std::abs(est.m - m) < 1e-6);
        CHECK(est.residual_rms < 1e-8);
    }
}

TEST_CASE("estimator throws on a constant clean image") {
    HdrImage clean(16, 16, 0.5);
    PsfKernel k = gaussian_kernel(5, 1.0);
    ScatteringParams p = ScatteringParams::from_alpha(0.7, 0.5);
    HdrImage degraded = convolve_fft(scatter_forward(clean, p), k);
    CHECK_THROWS_AS(estimate_params(degraded, clean, k), UnidentifiableError);
}

TEST_CASE("m is flagged invalid when alpha is at 1") {
    HdrImage clean = random_hdr(24, 24, 51);
    PsfKernel k = gaussian_kernel(5, 0.9);
    // alpha = 1: the veil term vanishes, m cannot be recovered
    ScatteringParams p = ScatteringParams::from_alpha(1.0, 0.33);
    HdrImage degraded = convolve_fft(scatter_forward(clean, p), k);
    ParamEstimate est = estimate_params(degraded, clean, k);
    CHECK(std::abs(est.alpha - 1.0) < 1e-9);
    CHECK_FALSE(est.m_valid);
}

TEST_CASE("estimator rejects mismatched shapes") {
    HdrImage a(8, 8, 0.1), b(8, 9, 0.1);
    CHECK_THROWS_AS(estimate_params(a, b, delta_kernel()), std::invalid_argument);
}
