#include "udc/tonemap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udc {

std::string tone_curve_kind_name(ToneCurveKind kind) {
    switch (kind) {
        case ToneCurveKind::ReinhardOffset: return "reinhard-offset";
    }
    throw std::invalid_argument("unknown tone curve kind");
}

ToneCurveKind tone_curve_kind_from_name(const std::string& name) {
    if (name == "reinhard-offset") return ToneCurveKind::ReinhardOffset;
    throw std::invalid_argument("unknown tone curve kind: " + name);
}

LdrImage tonemap_forward(const HdrImage& img, const ToneCurve& curve) {
    curve.validate();
    LdrImage out(img.height(), img.width());
    const double* src = img.data();
    double* dst = out.data();
    for (size_t i = 0; i < img.sample_count(); ++i) {
        const double y = src[i] / (src[i] + curve.c);
        dst[i] = std::clamp(y, 0.0, 1.0);
    }
    return out;
}

HdrImage tonemap_inverse(const LdrImage& img, const ToneCurve& curve) {
    curve.validate();
    constexpr double kMaxY = 1.0 - 1e-6;
    HdrImage out(img.height(), img.width());
    const double* src = img.data();
    double* dst = out.data();
    for (size_t i = 0; i < img.sample_count(); ++i) {
        const double y = std::clamp(src[i], 0.0, kMaxY);
        dst[i] = curve.c * y / (1.0 - y);
    }
    return out;
}

LdrImage clip_quantize(const LdrImage& img) {
    LdrImage out(img.height(), img.width(), 0.0, BitDepth::Eight);
    const double* src = img.data();
    double* dst = out.data();
    for (size_t i = 0; i < img.sample_count(); ++i) {
        const double v = std::clamp(src[i], 0.0, 1.0);
        dst[i] = std::round(v * 255.0) / 255.0;
    }
    return out;
}

}  // namespace udc
