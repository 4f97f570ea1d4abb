#include "udc/image.hpp"

#include <algorithm>
#include <cmath>

namespace udc {

namespace {

void check_dims(int height, int width) {
    if (height < 1 || width < 1) {
        throw std::invalid_argument("image dimensions must be >= 1, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
}

}  // namespace

Plane::Plane(int h, int w, double fill) : height(h), width(w) {
    check_dims(h, w);
    data.assign(static_cast<size_t>(h) * w, fill);
}

HdrImage::HdrImage(int height, int width, double fill) : height_(height), width_(width) {
    check_dims(height, width);
    data_.assign(static_cast<size_t>(height) * width * 3, fill);
}

void HdrImage::validate() const {
    for (double v : data_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("HdrImage sample out of domain (finite, >= 0): " +
                                        std::to_string(v));
        }
    }
}

LdrImage::LdrImage(int height, int width, double fill, BitDepth depth)
    : height_(height), width_(width), bit_depth_(depth) {
    check_dims(height, width);
    data_.assign(static_cast<size_t>(height) * width * 3, fill);
}

void LdrImage::validate() const {
    for (double v : data_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("LdrImage sample out of [0,1]: " + std::to_string(v));
        }
        if (bit_depth_ == BitDepth::Eight) {
            double scaled = v * 255.0;
            if (std::abs(scaled - std::round(scaled)) > 1e-9) {
                throw std::invalid_argument("8-bit LdrImage sample is not a multiple of 1/255");
            }
        }
    }
}

namespace {

template <typename Img>
Plane gray_impl(const Img& img, const GrayWeights& w) {
    Plane out(img.height(), img.width());
    const double* p = img.data();
    for (size_t i = 0; i < out.size(); ++i, p += 3) {
        out.data[i] = w.r * p[0] + w.g * p[1] + w.b * p[2];
    }
    return out;
}

}  // namespace

Plane to_grayscale(const HdrImage& img, const GrayWeights& w) { return gray_impl(img, w); }
Plane to_grayscale(const LdrImage& img, const GrayWeights& w) { return gray_impl(img, w); }

void hsv_from_rgb(double r, double g, double b, double& h, double& s, double& v) {
    double mx = std::max({r, g, b});
    double mn = std::min({r, g, b});
    double delta = mx - mn;
    v = mx;
    s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0 || s == 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r) {
        h = 60.0 * ((g - b) / delta);
    } else if (mx == g) {
        h = 60.0 * (2.0 + (b - r) / delta);
    } else {
        h = 60.0 * (4.0 + (r - g) / delta);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
}

void rgb_from_hsv(double h, double s, double v, double& r, double& g, double& b) {
    if (s <= 0.0) {
        r = g = b = v;
        return;
    }
    double sector = h / 60.0;
    int i = static_cast<int>(std::floor(sector)) % 6;
    double f = sector - std::floor(sector);
    double p = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

HsvPlanes rgb_to_hsv(const LdrImage& img) {
    HsvPlanes out{Plane(img.height(), img.width()), Plane(img.height(), img.width()),
                  Plane(img.height(), img.width())};
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            hsv_from_rgb(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), out.h.at(y, x),
                         out.s.at(y, x), out.v.at(y, x));
        }
    }
    return out;
}

LdrImage hsv_to_rgb(const HsvPlanes& hsv) {
    LdrImage out(hsv.h.height, hsv.h.width);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            rgb_from_hsv(hsv.h.at(y, x), hsv.s.at(y, x), hsv.v.at(y, x), out.at(y, x, 0),
                         out.at(y, x, 1), out.at(y, x, 2));
        }
    }
    return out;
}

namespace {

template <typename Img>
Img crop_impl(const Img& img, int x0, int y0, int w, int h) {
    if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
        throw std::out_of_range("crop_patch rectangle (" + std::to_string(x0) + "," +
                                std::to_string(y0) + "," + std::to_string(w) + "," +
                                std::to_string(h) + ") outside image " +
                                std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
    Img out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
            }
        }
    }
    return out;
}

}  // namespace

HdrImage crop_patch(const HdrImage& img, int x0, int y0, int w, int h) {
    return crop_impl(img, x0, y0, w, h);
}

LdrImage crop_patch(const LdrImage& img, int x0, int y0, int w, int h) {
    LdrImage out = crop_impl(img, x0, y0, w, h);
    out.set_bit_depth(img.bit_depth());
    return out;
}

LdrImage clip_to_ldr(const HdrImage& img) {
    LdrImage out(img.height(), img.width());
    const double* src = img.data();
    double* dst = out.data();
    for (size_t i = 0; i < img.sample_count(); ++i) {
        dst[i] = std::clamp(src[i], 0.0, 1.0);
    }
    return out;
}

double plane_mean(const Plane& p) {
    // Kahan compensated sum.
    double sum = 0.0, comp = 0.0;
    for (double v : p.data) {
        double y = v - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(p.data.size());
}

}  // namespace udc
