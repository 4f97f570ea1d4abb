#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "udc/image.hpp"
#include "udc/rng.hpp"

namespace udc {

/// Dense H x W x C activation tensor, row-major with interleaved channels.
/// Forward-only reference math; everything is double precision.
struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c, double fill = 0.0);

    double& at(int y, int x, int c) { return data[idx(y, x, c)]; }
    double at(int y, int x, int c) const { return data[idx(y, x, c)]; }
    size_t idx(int y, int x, int c) const {
        return (static_cast<size_t>(y) * width + x) * static_cast<size_t>(channels) + c;
    }
};

/// Desk-scale architecture description: three resolution levels, attention
/// block counts per level, total gated-block budget, channel widths.
struct NetConfig {
    std::array<int, 3> tsab_counts{2, 3, 4};
    int gcab_count = 16;
    std::array<int, 3> widths{24, 48, 96};
    /// 3x3 depthwise taps inside the attention Q/K/V generators. Off by
    /// default: pointwise-only generators keep the attention exactly
    /// equivariant under arbitrary spatial permutations, not just shifts.
    bool spatial_mixing = false;
    /// Divide attention logits by H*W before the softmax (numerical guard
    /// against huge dot products; the softmax stays row-stochastic).
    bool scale_attention_logits = true;

    static NetConfig full() { return NetConfig{}; }
    static NetConfig light() {
        NetConfig c;
        c.widths = {16, 32, 64};
        return c;
    }

    void validate() const;
};

// Weight containers. Convolutions follow the usual deep-learning convention
// (cross-correlation) with circular padding, so every block is exactly
// shift-equivariant.

struct Conv2dWeights {
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 1;  // odd
    std::vector<double> w;  // [out][in][ky][kx]
    std::vector<double> b;  // [out]
};

struct DepthwiseWeights {
    int channels = 0;
    int ksize = 3;
    std::vector<double> w;  // [c][ky][kx]
    std::vector<double> b;  // [c]
};

/// Per-pixel normalization across channels with per-channel affine.
struct LayerNormWeights {
    int channels = 0;
    std::vector<double> scale;
    std::vector<double> shift;
};

struct CsaWeights {
    LayerNormWeights ln;
    Conv2dWeights q_pw, k_pw, v_pw;
    DepthwiseWeights q_dw, k_dw, v_dw;  // applied only when spatial_mixing
    bool spatial_mixing = false;
    bool scale_logits = true;
};

struct FfnWeights {
    LayerNormWeights ln;
    Conv2dWeights expand;    // C -> 2C
    Conv2dWeights contract;  // 2C -> C
};

struct TsabWeights {
    CsaWeights csa;
    FfnWeights ffn;
};

struct GcabWeights {
    Conv2dWeights conv;      // 3x3 trunk
    Conv2dWeights gate_pw1;  // pointwise before the depthwise taps
    DepthwiseWeights gate_dw;
    Conv2dWeights gate_pw2;  // sigmoid branch
    Conv2dWeights se_reduce;  // squeeze-excite bottleneck (1x1 on pooled vector)
    Conv2dWeights se_expand;
};

struct FfbWeights {
    Conv2dWeights v_pw1, v_pw2;  // scale head
    Conv2dWeights w_pw1, w_pw2;  // shift head
};

struct HeadWeights {
    int in_ch = 0;
    int hidden = 0;
    std::vector<double> w1, b1;  // hidden x in_ch, hidden
    std::vector<double> w2, b2;  // 2 x hidden, 2
};

struct NetWeights {
    NetConfig cfg;

    // parameter-estimation branch
    Conv2dWeights s_shallow;          // 3 -> w0, 3x3
    std::vector<TsabWeights> tsabs;   // level order, R1+R2+R3 entries
    Conv2dWeights s_down1, s_down2;   // stride-2 3x3, doubling resolution level
    HeadWeights head;

    // restoration branch (U-shape)
    Conv2dWeights i_shallow;          // 3 -> w0, 3x3
    std::vector<GcabWeights> enc1, enc2, bottleneck, dec2, dec1;
    Conv2dWeights i_down1, i_down2;   // stride-2 3x3
    FfbWeights ffb1, ffb2, ffb3;      // per-level fusion
    Conv2dWeights up2_pw, up1_pw;     // pointwise after nearest-neighbor 2x
    Conv2dWeights reduce2, reduce1;   // concat(2C) -> C pointwise
    Conv2dWeights out_conv;           // w0 -> 3, 3x3
};

/// Seeded init: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], all
/// biases zero, normalization scale 1 / shift 0. Same seed, same bits.
NetWeights init_weights(const NetConfig& cfg, uint64_t seed);

/// Same structure with every projection weight and bias zero (residual
/// paths then act as identities).
NetWeights zero_weights(const NetConfig& cfg);

// Primitive forwards (circular padding throughout).
FeatureMap conv2d(const FeatureMap& x, const Conv2dWeights& w, int stride = 1);
FeatureMap depthwise(const FeatureMap& x, const DepthwiseWeights& w);
FeatureMap layer_norm(const FeatureMap& x, const LayerNormWeights& w);
FeatureMap upsample2x(const FeatureMap& x);
FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);
std::vector<double> global_average_pool(const FeatureMap& x);

/// Channel attention matrix A in C x C, each row softmax-normalized.
/// Logits are (Q^T K)[c][c'], summed over all pixels.
std::vector<double> csa_attention(const FeatureMap& x, const CsaWeights& w);

/// Channel self-attention with residual: X + reshape(V A^T).
FeatureMap csa_forward(const FeatureMap& x, const CsaWeights& w);

/// Attention block: CSA, then a pointwise feed-forward (expand 2x, smooth
/// gate activation, contract) on the normalized result, both residual.
FeatureMap tsab_forward(const FeatureMap& x, const TsabWeights& w);

/// Multiplicative spatial gate: depthwise(pointwise1(Y)) * sigmoid(pointwise2(Y)).
FeatureMap gating(const FeatureMap& y, const GcabWeights& w);

/// Gated block: Y + squeeze_excite(gating(act(conv(Y)))).
FeatureMap gcab_forward(const FeatureMap& y, const GcabWeights& w);

/// Fusion: predict per-sample scale v and shift w from u, return v*f + w.
FeatureMap ffb_forward(const FeatureMap& f, const FeatureMap& u, const FfbWeights& w);

/// Pooled two-layer MLP producing the (alpha, m) estimate.
std::pair<double, double> head_forward(const FeatureMap& u3, const HeadWeights& w);

struct NetOutput {
    LdrImage restored;
    double alpha_hat = 0.0;
    double m_hat = 0.0;
};

/// Full two-branch forward; H and W must be divisible by 4.
NetOutput net_forward(const LdrImage& input, const NetWeights& w);

struct LossBreakdown {
    double total = 0.0;
    double param = 0.0;  // squared error on (alpha, m)
    double image = 0.0;  // mean absolute error on the restored image
};

LossBreakdown loss_total(const LdrImage& b_hat, const LdrImage& b, double alpha_hat, double alpha,
                         double m_hat, double m, double w_param = 0.1, double w_image = 1.0);

// Flat binary weight bundle: magic "UDCW", version, config, then named
// tensors as (name, dims, little-endian float32 payload).
void save_weights(const NetWeights& w, const std::string& path);
NetWeights load_weights(const std::string& path);

// Helpers shared by the self-test and the property tests.
std::vector<int> random_permutation(int n, SplitMix64& rng);
FeatureMap permute_pixels(const FeatureMap& x, const std::vector<int>& perm);
FeatureMap random_feature_map(int h, int w, int c, SplitMix64& rng);
LdrImage cyclic_shift(const LdrImage& img, int dy, int dx);

/// Runs the whole invariant suite at the given size/config, logging one line
/// per check. Returns true when every check passes.
bool run_selftest(uint64_t seed, int size, const NetConfig& cfg, std::ostream& log);

}  // namespace udc
