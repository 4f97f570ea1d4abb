#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "udc/image_io.hpp"
#include "udc/rng.hpp"
#include "udc/tonemap.hpp"

using namespace udc;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
    static fs::path d = [] {
        fs::path p = fs::temp_directory_path() / "udc_io_tests";
        fs::create_directories(p);
        return p;
    }();
    return d;
}

HdrImage random_hdr(int h, int w, uint64_t seed, double scale = 4.0) {
    SplitMix64 rng(seed);
    HdrImage img(h, w);
    for (size_t i = 0; i < img.sample_count(); ++i)
        img.data()[i] = static_cast<double>(static_cast<float>(scale * rng.uniform01()));
    return img;
}

}  // namespace

TEST_CASE("pfm round-trip is bitwise exact for float32 payloads") {
    HdrImage img = random_hdr(13, 9, 77);
    fs::path p = tmpdir() / "rt.pfm";
    write_pfm(img, p.string());
    HdrImage back = read_pfm(p.string());
    REQUIRE(back.height() == 13);
    REQUIRE(back.width() == 9);
    for (size_t i = 0; i < img.sample_count(); ++i) CHECK(back.data()[i] == img.data()[i]);
}

TEST_CASE("gray pfm round-trips a plane") {
    Plane pl(5, 4);
    SplitMix64 rng(3);
    for (auto& v : pl.data) v = static_cast<double>(static_cast<float>(rng.uniform01()));
    fs::path p = tmpdir() / "gray.pfm";
    write_pfm_gray(pl, p.string());
    Plane back = read_pfm_gray(p.string());
    REQUIRE(back.height == 5);
    REQUIRE(back.width == 4);
    for (size_t i = 0; i < pl.size(); ++i) CHECK(back.data[i] == pl.data[i]);
}

TEST_CASE("truncated pfm reports the failure offset") {
    HdrImage img = random_hdr(6, 6, 5);
    fs::path p = tmpdir() / "trunc.pfm";
    write_pfm(img, p.string());
    auto full = fs::file_size(p);
    fs::resize_file(p, full - 40);
    try {
        read_pfm(p.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() > 0);
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
}

TEST_CASE("malformed pfm headers are rejected") {
    fs::path p = tmpdir() / "bad.pfm";
    std::ofstream out(p, std::ios::binary);
    out << "PX\n4 4\n-1.0\n";
    out.close();
    CHECK_THROWS_AS(read_pfm(p.string()), ParseError);

    std::ofstream out2(p, std::ios::binary);
    out2 << "PF\n-3 2\n-1.0\n";
    out2.close();
    CHECK_THROWS_AS(read_pfm(p.string()), ParseError);
}

TEST_CASE("ppm round-trips 8-bit data") {
    LdrImage img(7, 5, 0.0, BitDepth::Eight);
    SplitMix64 rng(9);
    for (size_t i = 0; i < img.sample_count(); ++i)
        img.data()[i] = static_cast<double>(rng.next() % 256) / 255.0;
    fs::path p = tmpdir() / "rt.ppm";
    write_ppm(img, p.string());
    LdrImage back = read_ppm(p.string());
    REQUIRE(back.bit_depth() == BitDepth::Eight);
    for (size_t i = 0; i < img.sample_count(); ++i) CHECK(back.data()[i] == img.data()[i]);
}

TEST_CASE("ppm with a non-255 maxval is rejected") {
    fs::path p = tmpdir() / "max.ppm";
    std::ofstream out(p, std::ios::binary);
    out << "P6\n2 1\n65535\n";
    char payload[12] = {0};
    out.write(payload, sizeof payload);
    out.close();
    CHECK_THROWS_AS(read_ppm(p.string()), ParseError);
}

TEST_CASE("png round-trips 8-bit data") {
    LdrImage img(9, 11, 0.0, BitDepth::Eight);
    SplitMix64 rng(10);
    for (size_t i = 0; i < img.sample_count(); ++i)
        img.data()[i] = static_cast<double>(rng.next() % 256) / 255.0;
    fs::path p = tmpdir() / "rt.png";
    write_png(img, p.string());
    LdrImage back = read_png(p.string());
    REQUIRE(back.height() == 9);
    REQUIRE(back.width() == 11);
    for (size_t i = 0; i < img.sample_count(); ++i) CHECK(back.data()[i] == img.data()[i]);
}

TEST_CASE("detect_format keys off the extension") {
    CHECK(detect_format("a/b/c.pfm") == ImageFormat::Pfm);
    CHECK(detect_format("x.PPM") == ImageFormat::Ppm);
    CHECK(detect_format("x.png") == ImageFormat::Png);
    CHECK_THROWS_AS(detect_format("noext"), std::runtime_error);
}

TEST_CASE("read_hdr promotes ldr formats without changing values") {
    LdrImage img(3, 3, 0.0, BitDepth::Eight);
    img.at(1, 1, 0) = 128.0 / 255.0;
    img.at(2, 0, 2) = 1.0;
    fs::path p = tmpdir() / "promote.png";
    write_png(img, p.string());
    HdrImage h = read_hdr(p.string());
    CHECK(h.at(1, 1, 0) == 128.0 / 255.0);
    CHECK(h.at(2, 0, 2) == 1.0);
    CHECK(h.at(0, 0, 0) == 0.0);
}

TEST_CASE("write_image picks the container from the extension") {
    LdrImage img(4, 4, 0.25);
    fs::path p = tmpdir() / "auto.pfm";
    write_image(img, p.string());
    HdrImage h = read_pfm(p.string());
    CHECK(h.at(0, 0, 0) == 0.25);

    LdrImage q = clip_quantize(img);
    fs::path p2 = tmpdir() / "auto.png";
    write_image(q, p2.string());
    LdrImage back = read_ldr(p2.string());
    CHECK(back.at(3, 3, 1) == q.at(3, 3, 1));
}

TEST_CASE("missing files raise std::runtime_error") {
    CHECK_THROWS_AS(read_pfm((tmpdir() / "nope.pfm").string()), std::runtime_error);
    CHECK_THROWS_AS(read_png((tmpdir() / "nope.png").string()), std::runtime_error);
}
