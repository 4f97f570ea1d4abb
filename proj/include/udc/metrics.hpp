#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "udc/image.hpp"

namespace udc {

/// 10*log10(peak^2 / MSE) with peak fixed at 1, MSE taken over every sample
/// of every channel. Identical inputs give +infinity (callers serialize it
/// as "inf"). Throws std::invalid_argument on dimension mismatch.
double psnr(const HdrImage& ref, const HdrImage& test);
double psnr(const LdrImage& ref, const LdrImage& test);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// dynamic range 1. Statistics come from valid (fully interior) windows
/// only; each RGB channel is scored separately and the three are averaged.
/// Throws std::invalid_argument if either side is smaller than the window.
double ssim(const LdrImage& ref, const LdrImage& test);
double ssim(const HdrImage& ref, const HdrImage& test);

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<std::array<double, 3>> hist_distance;  // h, s, v
};

MetricReport compare_images(const LdrImage& ref, const LdrImage& test);

/// Per-channel HSV occupancy counts over a set of images.
struct HsvHistogram {
    std::vector<std::uint64_t> bins_h;  // hue in [0, 360)
    std::vector<std::uint64_t> bins_s;  // saturation in [0, 1]
    std::vector<std::uint64_t> bins_v;  // value in [0, 1]
    std::uint64_t total = 0;            // pixels accumulated

    int bin_count() const { return static_cast<int>(bins_h.size()); }
};

HsvHistogram make_histogram(int bins = 64);

/// Accumulate one image's pixels into an existing histogram.
void accumulate_hsv(HsvHistogram& hist, const LdrImage& img);

/// Counts accumulated over all pixels of all images. Throws on an empty set.
HsvHistogram hsv_histograms(const std::vector<LdrImage>& images, int bins = 64);

/// Merge partial counts (associative, for parallel accumulation).
void merge(HsvHistogram& into, const HsvHistogram& from);

/// L1 distance between the normalized histograms, per channel; each distance
/// lies in [0,2]. Throws on bin-count mismatch or empty histograms.
std::array<double, 3> hist_distance(const HsvHistogram& a, const HsvHistogram& b);

}  // namespace udc
