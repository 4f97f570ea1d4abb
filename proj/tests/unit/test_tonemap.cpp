#include <doctest.h>

#include <cmath>

#include "udc/rng.hpp"
#include "udc/tonemap.hpp"

using namespace udc;

namespace {

HdrImage single(double v) {
    HdrImage img(1, 1);
    img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = v;
    return img;
}

}  // namespace

TEST_CASE("reinhard-offset forward hits pinned values") {
    ToneCurve tc;  // c = 0.25
    CHECK(tonemap_forward(single(0.0), tc).at(0, 0, 0) == 0.0);
    CHECK(tonemap_forward(single(0.25), tc).at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tonemap_forward(single(1.0), tc).at(0, 0, 0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(tonemap_forward(single(0.75), tc).at(0, 0, 0) == doctest::Approx(0.75).epsilon(1e-15));

    ToneCurve tc1{ToneCurveKind::ReinhardOffset, 1.0};
    CHECK(tonemap_forward(single(1.0), tc1).at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("forward output always lands in [0,1)") {
    ToneCurve tc;
    SplitMix64 rng(1);
    HdrImage img(8, 8);
    for (size_t i = 0; i < img.sample_count(); ++i) img.data()[i] = 50.0 * rng.uniform01();
    LdrImage out = tonemap_forward(img, tc);
    for (size_t i = 0; i < out.sample_count(); ++i) {
        CHECK(out.data()[i] >= 0.0);
        CHECK(out.data()[i] < 1.0);
    }
}

TEST_CASE("forward is strictly increasing") {
    ToneCurve tc;
    double prev = -1.0;
    for (double x = 0.0; x <= 20.0; x += 0.05) {
        double y = tonemap_forward(single(x), tc).at(0, 0, 0);
        CHECK(y > prev);
        prev = y;
    }
}

TEST_CASE("inverse undoes forward to 1e-9 on moderate radiance") {
    ToneCurve tc;
    SplitMix64 rng(2);
    HdrImage img(6, 6);
    for (size_t i = 0; i < img.sample_count(); ++i) img.data()[i] = 5.0 * rng.uniform01();
    HdrImage back = tonemap_inverse(tonemap_forward(img, tc), tc);
    for (size_t i = 0; i < img.sample_count(); ++i)
        CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-9));
}

TEST_CASE("inverse saturates at the clamp ceiling") {
    ToneCurve tc;
    LdrImage sat(1, 1, 1.0);
    double x = tonemap_inverse(sat, tc).at(0, 0, 0);
    double ceiling = 0.25 * (1.0 - 1e-6) / 1e-6;
    CHECK(x == doctest::Approx(ceiling).epsilon(1e-9));

    LdrImage near(1, 1, 1.0 - 1e-9);
    CHECK(tonemap_inverse(near, tc).at(0, 0, 0) == doctest::Approx(ceiling).epsilon(1e-9));

    LdrImage half(1, 1, 0.5);
    CHECK(tonemap_inverse(half, tc).at(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("tone curve names round-trip") {
    CHECK(tone_curve_kind_name(ToneCurveKind::ReinhardOffset) == "reinhard-offset");
    CHECK(tone_curve_kind_from_name("reinhard-offset") == ToneCurveKind::ReinhardOffset);
    CHECK_THROWS_AS(tone_curve_kind_from_name("gamma22"), std::invalid_argument);
}

TEST_CASE("nonpositive curve constants are rejected") {
    ToneCurve tc{ToneCurveKind::ReinhardOffset, 0.0};
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc.c = -0.5;
    CHECK_THROWS_AS(tonemap_forward(single(1.0), tc), std::invalid_argument);
}

TEST_CASE("clip_quantize lands on the 1/255 grid with ties away from zero") {
    LdrImage img(1, 5);
    img.at(0, 0, 0) = 0.5;           // 127.5 -> 128
    img.at(0, 1, 0) = 1.7;           // clamps to 1
    img.at(0, 2, 0) = 0.0;
    img.at(0, 3, 0) = 1.0;
    img.at(0, 4, 0) = 100.0 / 255.0; // already on the grid
    LdrImage q = clip_quantize(img);
    CHECK(q.bit_depth() == BitDepth::Eight);
    CHECK(q.at(0, 0, 0) == 128.0 / 255.0);
    CHECK(q.at(0, 1, 0) == 1.0);
    CHECK(q.at(0, 2, 0) == 0.0);
    CHECK(q.at(0, 3, 0) == 1.0);
    CHECK(q.at(0, 4, 0) == 100.0 / 255.0);
    CHECK_NOTHROW(q.validate());
}

TEST_CASE("clip_quantize is idempotent") {
    SplitMix64 rng(3);
    LdrImage img(8, 8);
    for (size_t i = 0; i < img.sample_count(); ++i) img.data()[i] = rng.uniform01();
    LdrImage q1 = clip_quantize(img);
    LdrImage q2 = clip_quantize(q1);
    for (size_t i = 0; i < q1.sample_count(); ++i) CHECK(q2.data()[i] == q1.data()[i]);
}
