#include <doctest.h>

#include <cmath>

#include "udc/convolve.hpp"
#include "udc/rng.hpp"

using namespace udc;

namespace {

HdrImage random_hdr(int h, int w, uint64_t seed) {
    SplitMix64 rng(seed);
    HdrImage img(h, w);
    for (size_t i = 0; i < img.sample_count(); ++i) img.data()[i] = 2.0 * rng.uniform01();
    return img;
}

double max_abs_diff(const HdrImage& a, const HdrImage& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.sample_count(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double mean_all(const HdrImage& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.sample_count(); ++i) s += a.data()[i];
    return s / static_cast<double>(a.sample_count());
}

}  // namespace

TEST_CASE("delta kernel is the identity for both routes") {
    HdrImage img = random_hdr(12, 17, 1);
    HdrImage f = convolve_fft(img, delta_kernel());
    HdrImage d = convolve_direct(img, delta_kernel());
    CHECK(max_abs_diff(d, img) == 0.0);
    CHECK(max_abs_diff(f, img) == 0.0);  // 1x1 kernels skip the transform
}

TEST_CASE("shifted delta produces a cyclic shift") {
    HdrImage img = random_hdr(8, 8, 2);
    // 3x3 kernel with its only mass one tap right and one tap down of center
    PsfKernel k = make_kernel(3, 3, {0, 0, 0, 0, 0, 0, 0, 0, 1});
    HdrImage out = convolve_direct(img, k);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(out.at(y, x, c) == img.at((y + 8 - 1) % 8, (x + 8 - 1) % 8, c));
    HdrImage outf = convolve_fft(img, k);
    CHECK(max_abs_diff(outf, out) < 1e-12);
}

TEST_CASE("fft and direct routes agree to 1e-9 across random instances") {
    SplitMix64 meta(99);
    for (int trial = 0; trial < 50; ++trial) {
        int h = 7 + static_cast<int>(meta.next() % 26);
        int w = 7 + static_cast<int>(meta.next() % 26);
        int ks = 1 + 2 * static_cast<int>(meta.next() % 4);  // 1,3,5,7
        ks = std::min(ks, std::min(h, w) | 1);
        std::vector<double> taps(static_cast<size_t>(ks) * ks);
        for (auto& t : taps) t = meta.uniform01();
        PsfKernel k = make_kernel(ks, ks, taps);
        HdrImage img = random_hdr(h, w, meta.next());
        HdrImage a = convolve_fft(img, k);
        HdrImage b = convolve_direct(img, k);
        CHECK(max_abs_diff(a, b) < 1e-9);
    }
}

TEST_CASE("convolution is linear") {
    HdrImage x = random_hdr(10, 10, 3);
    HdrImage y = random_hdr(10, 10, 4);
    PsfKernel k = gaussian_kernel(5, 1.1);
    HdrImage sum(10, 10);
    for (size_t i = 0; i < sum.sample_count(); ++i)
        sum.data()[i] = 2.0 * x.data()[i] + 0.5 * y.data()[i];
    HdrImage lhs = convolve_fft(sum, k);
    HdrImage cx = convolve_fft(x, k);
    HdrImage cy = convolve_fft(y, k);
    double worst = 0.0;
    for (size_t i = 0; i < lhs.sample_count(); ++i)
        worst = std::max(worst, std::abs(lhs.data()[i] - (2.0 * cx.data()[i] + 0.5 * cy.data()[i])));
    CHECK(worst < 1e-10);
}

TEST_CASE("unit-sum kernels preserve the mean under circular wrap") {
    HdrImage img = random_hdr(16, 24, 5);
    PsfKernel k = gaussian_kernel(7, 1.6);
    HdrImage out = convolve_fft(img, k);
    CHECK(mean_all(out) == doctest::Approx(mean_all(img)).epsilon(1e-12));
    HdrImage out2 = convolve_direct(img, k);
    CHECK(mean_all(out2) == doctest::Approx(mean_all(img)).epsilon(1e-12));
}

TEST_CASE("kernels larger than the image are rejected") {
    HdrImage img = random_hdr(4, 4, 6);
    PsfKernel k = gaussian_kernel(5, 1.0);
    CHECK_THROWS_AS(convolve_fft(img, k), std::invalid_argument);
    CHECK_THROWS_AS(convolve_direct(img, k), std::invalid_argument);
}

TEST_CASE("wiener deconvolution undoes a benign blur") {
    HdrImage img = random_hdr(24, 24, 7);
    PsfKernel k = gaussian_kernel(7, 0.8);
    HdrImage blurred = convolve_fft(img, k);
    HdrImage rec = deconvolve_wiener(blurred, k, 1e-10);
    CHECK(max_abs_diff(rec, img) < 1e-6);
}

TEST_CASE("wiener eps must be positive") {
    HdrImage img = random_hdr(8, 8, 8);
    PsfKernel k = delta_kernel();
    CHECK_THROWS_AS(deconvolve_wiener(img, k, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(deconvolve_wiener(img, k, -1.0), std::invalid_argument);
}

TEST_CASE("larger eps damps the inverse") {
    HdrImage img = random_hdr(16, 16, 9);
    PsfKernel k = gaussian_kernel(5, 1.2);
    HdrImage blurred = convolve_fft(img, k);
    double err_small = max_abs_diff(deconvolve_wiener(blurred, k, 1e-9), img);
    double err_large = max_abs_diff(deconvolve_wiener(blurred, k, 1e-1), img);
    CHECK(err_small < err_large);
}
