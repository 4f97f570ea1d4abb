#pragma once

#include <string>

#include "udc/image.hpp"

namespace udc {

enum class ToneCurveKind { ReinhardOffset };

/// Tone mapping + clipping operator. The reinhard-offset curve maps
/// x -> x/(x+c): strictly increasing on [0, inf), 0 -> 0, and saturating
/// toward 1, so flares keep structure instead of clipping hard.
struct ToneCurve {
    ToneCurveKind kind = ToneCurveKind::ReinhardOffset;
    double c = 0.25;

    void validate() const {
        if (!(c > 0.0)) throw std::invalid_argument("tone curve constant must be > 0");
    }
};

std::string tone_curve_kind_name(ToneCurveKind kind);
ToneCurveKind tone_curve_kind_from_name(const std::string& name);

/// y = x/(x+c), clipped to [0,1]. The clip is a no-op for this curve but is
/// applied so other curve kinds can slot in.
LdrImage tonemap_forward(const HdrImage& img, const ToneCurve& curve);

/// x = c*y/(1-y). Saturated samples (y >= 1 - 1e-6) are treated as
/// y = 1 - 1e-6; saturation itself is not invertible.
HdrImage tonemap_inverse(const LdrImage& img, const ToneCurve& curve);

/// Clamp to [0,1] and quantize to exact multiples of 1/255,
/// round-to-nearest with ties away from zero. Idempotent.
LdrImage clip_quantize(const LdrImage& img);

}  // namespace udc
