#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace udc {

/// Single-channel 2-D map of doubles (grayscale, H/S/V planes, masks).
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(int h, int w, double fill = 0.0);

    double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return data.size(); }
};

/// Linear-radiance RGB image. Values are nonnegative and unbounded above.
/// Layout is row-major with interleaved channels (R,G,B per pixel).
class HdrImage {
public:
    HdrImage() = default;
    HdrImage(int height, int width, double fill = 0.0);

    int height() const { return height_; }
    int width() const { return width_; }

    double& at(int y, int x, int c) { return data_[idx(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[idx(y, x, c)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    size_t sample_count() const { return data_.size(); }

    /// Throws std::invalid_argument if any sample is negative or non-finite.
    void validate() const;

private:
    size_t idx(int y, int x, int c) const {
        return (static_cast<size_t>(y) * width_ + x) * 3 + c;
    }
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

enum class BitDepth { Float, Eight };

/// Display-referred RGB image with values in [0,1]. When bit_depth is Eight,
/// every sample is an exact multiple of 1/255.
class LdrImage {
public:
    LdrImage() = default;
    LdrImage(int height, int width, double fill = 0.0, BitDepth depth = BitDepth::Float);

    int height() const { return height_; }
    int width() const { return width_; }
    BitDepth bit_depth() const { return bit_depth_; }
    void set_bit_depth(BitDepth d) { bit_depth_ = d; }

    double& at(int y, int x, int c) { return data_[idx(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[idx(y, x, c)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    size_t sample_count() const { return data_.size(); }

    void validate() const;

private:
    size_t idx(int y, int x, int c) const {
        return (static_cast<size_t>(y) * width_ + x) * 3 + c;
    }
    int height_ = 0;
    int width_ = 0;
    BitDepth bit_depth_ = BitDepth::Float;
    std::vector<double> data_;
};

/// Fixed convex grayscale weights; r + g + b == 1 exactly.
struct GrayWeights {
    double r;
    double g;
    double b;

    /// Rec.601 luma weights. Blue is derived as 1 - r - g so the sum is
    /// exactly 1 in double precision.
    static constexpr GrayWeights rec601() {
        return GrayWeights{0.299, 0.587, 1.0 - 0.299 - 0.587};
    }
};

Plane to_grayscale(const HdrImage& img, const GrayWeights& w = GrayWeights::rec601());
Plane to_grayscale(const LdrImage& img, const GrayWeights& w = GrayWeights::rec601());

/// Hexcone HSV from one RGB sample in [0,1].
/// H in [0,360) with H=0 when S=0; S=(max-min)/max for max>0, else 0; V=max.
void hsv_from_rgb(double r, double g, double b, double& h, double& s, double& v);
void rgb_from_hsv(double h, double s, double v, double& r, double& g, double& b);

struct HsvPlanes {
    Plane h;
    Plane s;
    Plane v;
};

HsvPlanes rgb_to_hsv(const LdrImage& img);
LdrImage hsv_to_rgb(const HsvPlanes& hsv);

HdrImage crop_patch(const HdrImage& img, int x0, int y0, int w, int h);
LdrImage crop_patch(const LdrImage& img, int x0, int y0, int w, int h);

/// Clamps linear radiance to [0,1]; used when HSV statistics are wanted on
/// pre-tone-map data.
LdrImage clip_to_ldr(const HdrImage& img);

/// Spatial mean of a plane, computed with compensated summation so the
/// result does not depend on accumulation luck.
double plane_mean(const Plane& p);

}  // namespace udc
