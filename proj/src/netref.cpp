#include "udc/netref.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

namespace udc {

FeatureMap::FeatureMap(int h, int w, int c, double fill)
    : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, fill) {
    if (h < 1 || w < 1 || c < 1) throw std::invalid_argument("feature map dimensions must be >= 1");
}

void NetConfig::validate() const {
    for (int r : tsab_counts)
        if (r < 1) throw std::invalid_argument("attention block counts must be >= 1");
    if (gcab_count < 1) throw std::invalid_argument("gated block count must be >= 1");
    if (!(widths[0] >= 1 && widths[0] < widths[1] && widths[1] < widths[2]))
        throw std::invalid_argument("channel widths must be strictly increasing");
}

namespace {

double silu(double x) { return x / (1.0 + std::exp(-x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double lrelu(double x) { return x > 0.0 ? x : 0.2 * x; }

int wrap(int v, int n) { return ((v % n) + n) % n; }

void check_channels(const FeatureMap& x, int expected, const char* who) {
    if (x.channels != expected)
        throw std::invalid_argument(std::string(who) + ": channel mismatch, got " +
                                    std::to_string(x.channels) + ", expected " +
                                    std::to_string(expected));
}

}  // namespace

FeatureMap conv2d(const FeatureMap& x, const Conv2dWeights& w, int stride) {
    check_channels(x, w.in_ch, "conv2d");
    if (w.ksize % 2 == 0) throw std::invalid_argument("conv2d kernel size must be odd");
    if (stride < 1 || x.height % stride != 0 || x.width % stride != 0)
        throw std::invalid_argument("conv2d stride must divide both sides");
    const int oh = x.height / stride, ow = x.width / stride;
    const int half = w.ksize / 2;
    FeatureMap out(oh, ow, w.out_ch);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int cy = oy * stride, cx = ox * stride;
            for (int o = 0; o < w.out_ch; ++o) {
                double acc = w.b[o];
                const double* wo = &w.w[static_cast<size_t>(o) * w.in_ch * w.ksize * w.ksize];
                for (int i = 0; i < w.in_ch; ++i) {
                    const double* wi = wo + static_cast<size_t>(i) * w.ksize * w.ksize;
                    for (int ky = 0; ky < w.ksize; ++ky) {
                        const int yy = wrap(cy + ky - half, x.height);
                        for (int kx = 0; kx < w.ksize; ++kx) {
                            const int xx = wrap(cx + kx - half, x.width);
                            acc += wi[ky * w.ksize + kx] * x.at(yy, xx, i);
                        }
                    }
                }
                out.at(oy, ox, o) = acc;
            }
        }
    }
    return out;
}

FeatureMap depthwise(const FeatureMap& x, const DepthwiseWeights& w) {
    check_channels(x, w.channels, "depthwise");
    if (w.ksize % 2 == 0) throw std::invalid_argument("depthwise kernel size must be odd");
    const int half = w.ksize / 2;
    FeatureMap out(x.height, x.width, x.channels);
    for (int y = 0; y < x.height; ++y) {
        for (int xx0 = 0; xx0 < x.width; ++xx0) {
            for (int c = 0; c < x.channels; ++c) {
                double acc = w.b[c];
                const double* wc = &w.w[static_cast<size_t>(c) * w.ksize * w.ksize];
                for (int ky = 0; ky < w.ksize; ++ky) {
                    const int yy = wrap(y + ky - half, x.height);
                    for (int kx = 0; kx < w.ksize; ++kx) {
                        const int xx = wrap(xx0 + kx - half, x.width);
                        acc += wc[ky * w.ksize + kx] * x.at(yy, xx, c);
                    }
                }
                out.at(y, xx0, c) = acc;
            }
        }
    }
    return out;
}

FeatureMap layer_norm(const FeatureMap& x, const LayerNormWeights& w) {
    check_channels(x, w.channels, "layer_norm");
    constexpr double kEps = 1e-6;
    FeatureMap out(x.height, x.width, x.channels);
    const int c = x.channels;
    for (int y = 0; y < x.height; ++y) {
        for (int xx = 0; xx < x.width; ++xx) {
            double mean = 0.0;
            for (int i = 0; i < c; ++i) mean += x.at(y, xx, i);
            mean /= c;
            double var = 0.0;
            for (int i = 0; i < c; ++i) {
                const double d = x.at(y, xx, i) - mean;
                var += d * d;
            }
            var /= c;
            const double inv = 1.0 / std::sqrt(var + kEps);
            for (int i = 0; i < c; ++i)
                out.at(y, xx, i) = (x.at(y, xx, i) - mean) * inv * w.scale[i] + w.shift[i];
        }
    }
    return out;
}

FeatureMap upsample2x(const FeatureMap& x) {
    FeatureMap out(x.height * 2, x.width * 2, x.channels);
    for (int y = 0; y < out.height; ++y)
        for (int xx = 0; xx < out.width; ++xx)
            for (int c = 0; c < x.channels; ++c) out.at(y, xx, c) = x.at(y / 2, xx / 2, c);
    return out;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("concat_channels: spatial mismatch");
    FeatureMap out(a.height, a.width, a.channels + b.channels);
    for (int y = 0; y < a.height; ++y) {
        for (int xx = 0; xx < a.width; ++xx) {
            for (int c = 0; c < a.channels; ++c) out.at(y, xx, c) = a.at(y, xx, c);
            for (int c = 0; c < b.channels; ++c) out.at(y, xx, a.channels + c) = b.at(y, xx, c);
        }
    }
    return out;
}

std::vector<double> global_average_pool(const FeatureMap& x) {
    std::vector<double> z(x.channels, 0.0);
    for (int y = 0; y < x.height; ++y)
        for (int xx = 0; xx < x.width; ++xx)
            for (int c = 0; c < x.channels; ++c) z[c] += x.at(y, xx, c);
    const double inv = 1.0 / (static_cast<double>(x.height) * x.width);
    for (double& v : z) v *= inv;
    return z;
}

namespace {

struct Qkv {
    FeatureMap q, k, v;
};

Qkv make_qkv(const FeatureMap& x, const CsaWeights& w) {
    FeatureMap xn = layer_norm(x, w.ln);
    Qkv r{conv2d(xn, w.q_pw), conv2d(xn, w.k_pw), conv2d(xn, w.v_pw)};
    if (w.spatial_mixing) {
        r.q = depthwise(r.q, w.q_dw);
        r.k = depthwise(r.k, w.k_dw);
        r.v = depthwise(r.v, w.v_dw);
    }
    return r;
}

std::vector<double> attention_from_qk(const FeatureMap& q, const FeatureMap& k, bool scale) {
    const int c = q.channels;
    const size_t npix = static_cast<size_t>(q.height) * q.width;
    std::vector<double> logits(static_cast<size_t>(c) * c, 0.0);
    for (size_t p = 0; p < npix; ++p) {
        const double* qp = &q.data[p * c];
        const double* kp = &k.data[p * c];
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) logits[static_cast<size_t>(i) * c + j] += qp[i] * kp[j];
    }
    if (scale) {
        const double s = 1.0 / static_cast<double>(npix);
        for (double& v : logits) v *= s;
    }
    for (int i = 0; i < c; ++i) {
        double* row = &logits[static_cast<size_t>(i) * c];
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < c; ++j) row[j] /= sum;
    }
    return logits;
}

}  // namespace

std::vector<double> csa_attention(const FeatureMap& x, const CsaWeights& w) {
    Qkv qkv = make_qkv(x, w);
    return attention_from_qk(qkv.q, qkv.k, w.scale_logits);
}

FeatureMap csa_forward(const FeatureMap& x, const CsaWeights& w) {
    Qkv qkv = make_qkv(x, w);
    std::vector<double> a = attention_from_qk(qkv.q, qkv.k, w.scale_logits);
    const int c = x.channels;
    FeatureMap out(x.height, x.width, c);
    const size_t npix = static_cast<size_t>(x.height) * x.width;
    for (size_t p = 0; p < npix; ++p) {
        const double* vp = &qkv.v.data[p * c];
        const double* xp = &x.data[p * c];
        double* op = &out.data[p * c];
        for (int i = 0; i < c; ++i) {
            const double* row = &a[static_cast<size_t>(i) * c];
            double acc = 0.0;
            for (int j = 0; j < c; ++j) acc += row[j] * vp[j];
            op[i] = xp[i] + acc;
        }
    }
    return out;
}

FeatureMap tsab_forward(const FeatureMap& x, const TsabWeights& w) {
    FeatureMap x1 = csa_forward(x, w.csa);
    FeatureMap h = conv2d(layer_norm(x1, w.ffn.ln), w.ffn.expand);
    for (double& v : h.data) v = silu(v);
    h = conv2d(h, w.ffn.contract);
    for (size_t i = 0; i < x1.data.size(); ++i) x1.data[i] += h.data[i];
    return x1;
}

FeatureMap gating(const FeatureMap& y, const GcabWeights& w) {
    FeatureMap a = depthwise(conv2d(y, w.gate_pw1), w.gate_dw);
    FeatureMap g = conv2d(y, w.gate_pw2);
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] *= sigmoid(g.data[i]);
    return a;
}

FeatureMap gcab_forward(const FeatureMap& y, const GcabWeights& w) {
    FeatureMap t = conv2d(y, w.conv);
    for (double& v : t.data) v = silu(v);
    t = gating(t, w);

    // squeeze-excite channel attention
    std::vector<double> z = global_average_pool(t);
    const int hidden = w.se_reduce.out_ch;
    std::vector<double> h(hidden);
    for (int j = 0; j < hidden; ++j) {
        double acc = w.se_reduce.b[j];
        for (int i = 0; i < w.se_reduce.in_ch; ++i)
            acc += w.se_reduce.w[static_cast<size_t>(j) * w.se_reduce.in_ch + i] * z[i];
        h[j] = std::max(acc, 0.0);
    }
    std::vector<double> scale(t.channels);
    for (int i = 0; i < w.se_expand.out_ch; ++i) {
        double acc = w.se_expand.b[i];
        for (int j = 0; j < hidden; ++j)
            acc += w.se_expand.w[static_cast<size_t>(i) * w.se_expand.in_ch + j] * h[j];
        scale[i] = sigmoid(acc);
    }

    FeatureMap out(y.height, y.width, y.channels);
    const size_t npix = static_cast<size_t>(y.height) * y.width;
    for (size_t p = 0; p < npix; ++p)
        for (int c = 0; c < y.channels; ++c)
            out.data[p * y.channels + c] =
                y.data[p * y.channels + c] + t.data[p * y.channels + c] * scale[c];
    return out;
}

FeatureMap ffb_forward(const FeatureMap& f, const FeatureMap& u, const FfbWeights& w) {
    if (f.height != u.height || f.width != u.width)
        throw std::invalid_argument("ffb_forward: spatial mismatch");
    FeatureMap v = conv2d(u, w.v_pw1);
    for (double& x : v.data) x = lrelu(x);
    v = conv2d(v, w.v_pw2);
    FeatureMap sh = conv2d(u, w.w_pw1);
    for (double& x : sh.data) x = lrelu(x);
    sh = conv2d(sh, w.w_pw2);
    check_channels(f, v.channels, "ffb_forward");
    FeatureMap out(f.height, f.width, f.channels);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = v.data[i] * f.data[i] + sh.data[i];
    return out;
}

std::pair<double, double> head_forward(const FeatureMap& u3, const HeadWeights& w) {
    check_channels(u3, w.in_ch, "head_forward");
    std::vector<double> z = global_average_pool(u3);
    std::vector<double> h(w.hidden);
    for (int j = 0; j < w.hidden; ++j) {
        double acc = w.b1[j];
        for (int i = 0; i < w.in_ch; ++i) acc += w.w1[static_cast<size_t>(j) * w.in_ch + i] * z[i];
        h[j] = sigmoid(acc);
    }
    double out[2];
    for (int k = 0; k < 2; ++k) {
        double acc = w.b2[k];
        for (int j = 0; j < w.hidden; ++j) acc += w.w2[static_cast<size_t>(k) * w.hidden + j] * h[j];
        out[k] = acc;
    }
    return {out[0], out[1]};
}

namespace {

Conv2dWeights build_conv(int in, int out, int k, SplitMix64* rng) {
    Conv2dWeights c;
    c.in_ch = in;
    c.out_ch = out;
    c.ksize = k;
    c.w.assign(static_cast<size_t>(out) * in * k * k, 0.0);
    c.b.assign(out, 0.0);
    if (rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in) * k * k);
        for (double& v : c.w) v = rng->uniform(-bound, bound);
    }
    return c;
}

DepthwiseWeights build_dw(int channels, SplitMix64* rng) {
    DepthwiseWeights d;
    d.channels = channels;
    d.ksize = 3;
    d.w.assign(static_cast<size_t>(channels) * 9, 0.0);
    d.b.assign(channels, 0.0);
    if (rng)
        for (double& v : d.w) v = rng->uniform(-1.0 / 3.0, 1.0 / 3.0);
    return d;
}

LayerNormWeights build_ln(int channels) {
    LayerNormWeights l;
    l.channels = channels;
    l.scale.assign(channels, 1.0);
    l.shift.assign(channels, 0.0);
    return l;
}

CsaWeights build_csa(int c, const NetConfig& cfg, SplitMix64* rng) {
    CsaWeights w;
    w.ln = build_ln(c);
    w.q_pw = build_conv(c, c, 1, rng);
    w.k_pw = build_conv(c, c, 1, rng);
    w.v_pw = build_conv(c, c, 1, rng);
    w.q_dw = build_dw(c, rng);
    w.k_dw = build_dw(c, rng);
    w.v_dw = build_dw(c, rng);
    w.spatial_mixing = cfg.spatial_mixing;
    w.scale_logits = cfg.scale_attention_logits;
    return w;
}

TsabWeights build_tsab(int c, const NetConfig& cfg, SplitMix64* rng) {
    TsabWeights w;
    w.csa = build_csa(c, cfg, rng);
    w.ffn.ln = build_ln(c);
    w.ffn.expand = build_conv(c, 2 * c, 1, rng);
    w.ffn.contract = build_conv(2 * c, c, 1, rng);
    return w;
}

GcabWeights build_gcab(int c, SplitMix64* rng) {
    GcabWeights w;
    w.conv = build_conv(c, c, 3, rng);
    w.gate_pw1 = build_conv(c, c, 1, rng);
    w.gate_dw = build_dw(c, rng);
    w.gate_pw2 = build_conv(c, c, 1, rng);
    const int hidden = std::max(1, c / 4);
    w.se_reduce = build_conv(c, hidden, 1, rng);
    w.se_expand = build_conv(hidden, c, 1, rng);
    return w;
}

FfbWeights build_ffb(int c, SplitMix64* rng) {
    FfbWeights w;
    w.v_pw1 = build_conv(c, c, 1, rng);
    w.v_pw2 = build_conv(c, c, 1, rng);
    w.w_pw1 = build_conv(c, c, 1, rng);
    w.w_pw2 = build_conv(c, c, 1, rng);
    return w;
}

HeadWeights build_head(int in, SplitMix64* rng) {
    HeadWeights w;
    w.in_ch = in;
    w.hidden = in;
    w.w1.assign(static_cast<size_t>(w.hidden) * in, 0.0);
    w.b1.assign(w.hidden, 0.0);
    w.w2.assign(2 * static_cast<size_t>(w.hidden), 0.0);
    w.b2.assign(2, 0.0);
    if (rng) {
        const double b1v = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : w.w1) v = rng->uniform(-b1v, b1v);
        const double b2v = 1.0 / std::sqrt(static_cast<double>(w.hidden));
        for (double& v : w.w2) v = rng->uniform(-b2v, b2v);
    }
    return w;
}

/// Total gated-block budget split over the five sites (enc1, enc2,
/// bottleneck, dec2, dec1) round-robin.
std::array<int, 5> distribute_gcabs(int total) {
    std::array<int, 5> counts{};
    for (int i = 0; i < total; ++i) ++counts[i % 5];
    return counts;
}

NetWeights build_weights(const NetConfig& cfg, SplitMix64* rng) {
    cfg.validate();
    NetWeights w;
    w.cfg = cfg;
    const int w0 = cfg.widths[0], w1 = cfg.widths[1], w2 = cfg.widths[2];

    w.s_shallow = build_conv(3, w0, 3, rng);
    for (int level = 0; level < 3; ++level)
        for (int r = 0; r < cfg.tsab_counts[level]; ++r)
            w.tsabs.push_back(build_tsab(cfg.widths[level], cfg, rng));
    w.s_down1 = build_conv(w0, w1, 3, rng);
    w.s_down2 = build_conv(w1, w2, 3, rng);
    w.head = build_head(w2, rng);

    w.i_shallow = build_conv(3, w0, 3, rng);
    const auto counts = distribute_gcabs(cfg.gcab_count);
    for (int i = 0; i < counts[0]; ++i) w.enc1.push_back(build_gcab(w0, rng));
    for (int i = 0; i < counts[1]; ++i) w.enc2.push_back(build_gcab(w1, rng));
    for (int i = 0; i < counts[2]; ++i) w.bottleneck.push_back(build_gcab(w2, rng));
    for (int i = 0; i < counts[3]; ++i) w.dec2.push_back(build_gcab(w1, rng));
    for (int i = 0; i < counts[4]; ++i) w.dec1.push_back(build_gcab(w0, rng));
    w.i_down1 = build_conv(w0, w1, 3, rng);
    w.i_down2 = build_conv(w1, w2, 3, rng);
    w.ffb1 = build_ffb(w0, rng);
    w.ffb2 = build_ffb(w1, rng);
    w.ffb3 = build_ffb(w2, rng);
    w.up2_pw = build_conv(w2, w1, 1, rng);
    w.up1_pw = build_conv(w1, w0, 1, rng);
    w.reduce2 = build_conv(2 * w1, w1, 1, rng);
    w.reduce1 = build_conv(2 * w0, w0, 1, rng);
    w.out_conv = build_conv(w0, 3, 3, rng);
    return w;
}

}  // namespace

NetWeights init_weights(const NetConfig& cfg, uint64_t seed) {
    SplitMix64 rng(seed);
    return build_weights(cfg, &rng);
}

NetWeights zero_weights(const NetConfig& cfg) { return build_weights(cfg, nullptr); }

NetOutput net_forward(const LdrImage& input, const NetWeights& w) {
    const NetConfig& cfg = w.cfg;
    cfg.validate();
    if (input.height() % 4 != 0 || input.width() % 4 != 0)
        throw std::invalid_argument("input sides must be divisible by 4");

    FeatureMap x(input.height(), input.width(), 3);
    std::copy(input.data(), input.data() + input.sample_count(), x.data.begin());

    // parameter-estimation branch
    FeatureMap u = conv2d(x, w.s_shallow);
    size_t t = 0;
    for (int r = 0; r < cfg.tsab_counts[0]; ++r) u = tsab_forward(u, w.tsabs[t++]);
    FeatureMap u1 = u;
    u = conv2d(u, w.s_down1, 2);
    for (int r = 0; r < cfg.tsab_counts[1]; ++r) u = tsab_forward(u, w.tsabs[t++]);
    FeatureMap u2 = u;
    u = conv2d(u, w.s_down2, 2);
    for (int r = 0; r < cfg.tsab_counts[2]; ++r) u = tsab_forward(u, w.tsabs[t++]);
    FeatureMap u3 = std::move(u);
    const auto [alpha_hat, m_hat] = head_forward(u3, w.head);

    // restoration branch
    FeatureMap e = conv2d(x, w.i_shallow);
    for (const auto& g : w.enc1) e = gcab_forward(e, g);
    FeatureMap e1 = e;
    e = conv2d(e, w.i_down1, 2);
    for (const auto& g : w.enc2) e = gcab_forward(e, g);
    FeatureMap e2 = e;
    e = conv2d(e, w.i_down2, 2);
    for (const auto& g : w.bottleneck) e = gcab_forward(e, g);
    FeatureMap e3 = std::move(e);

    FeatureMap g1 = ffb_forward(e1, u1, w.ffb1);
    FeatureMap g2 = ffb_forward(e2, u2, w.ffb2);
    FeatureMap d = ffb_forward(e3, u3, w.ffb3);

    d = conv2d(upsample2x(d), w.up2_pw);
    d = conv2d(concat_channels(d, g2), w.reduce2);
    for (const auto& g : w.dec2) d = gcab_forward(d, g);

    d = conv2d(upsample2x(d), w.up1_pw);
    d = conv2d(concat_channels(d, g1), w.reduce1);
    for (const auto& g : w.dec1) d = gcab_forward(d, g);

    FeatureMap rgb = conv2d(d, w.out_conv);
    NetOutput out;
    out.restored = LdrImage(input.height(), input.width());
    for (size_t i = 0; i < rgb.data.size(); ++i)
        out.restored.data()[i] = std::clamp(rgb.data[i], 0.0, 1.0);
    out.alpha_hat = alpha_hat;
    out.m_hat = m_hat;
    return out;
}

LossBreakdown loss_total(const LdrImage& b_hat, const LdrImage& b, double alpha_hat, double alpha,
                         double m_hat, double m, double w_param, double w_image) {
    if (b_hat.height() != b.height() || b_hat.width() != b.width())
        throw std::invalid_argument("loss_total: image shape mismatch");
    LossBreakdown l;
    const double da = alpha_hat - alpha, dm = m_hat - m;
    l.param = da * da + dm * dm;
    double acc = 0.0;
    for (size_t i = 0; i < b.sample_count(); ++i) acc += std::abs(b_hat.data()[i] - b.data()[i]);
    l.image = acc / static_cast<double>(b.sample_count());
    l.total = w_param * l.param + w_image * l.image;
    return l;
}

// ---------------------------------------------------------------------------
// weight bundle serialization

namespace {

struct TensorRef {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<double>* data;
};

void add_conv(std::vector<TensorRef>& out, const std::string& name, Conv2dWeights& c) {
    out.push_back({name + ".w",
                   {static_cast<uint32_t>(c.out_ch), static_cast<uint32_t>(c.in_ch),
                    static_cast<uint32_t>(c.ksize), static_cast<uint32_t>(c.ksize)},
                   &c.w});
    out.push_back({name + ".b", {static_cast<uint32_t>(c.out_ch)}, &c.b});
}

void add_dw(std::vector<TensorRef>& out, const std::string& name, DepthwiseWeights& d) {
    out.push_back({name + ".w",
                   {static_cast<uint32_t>(d.channels), static_cast<uint32_t>(d.ksize),
                    static_cast<uint32_t>(d.ksize)},
                   &d.w});
    out.push_back({name + ".b", {static_cast<uint32_t>(d.channels)}, &d.b});
}

void add_ln(std::vector<TensorRef>& out, const std::string& name, LayerNormWeights& l) {
    out.push_back({name + ".scale", {static_cast<uint32_t>(l.channels)}, &l.scale});
    out.push_back({name + ".shift", {static_cast<uint32_t>(l.channels)}, &l.shift});
}

void add_csa(std::vector<TensorRef>& out, const std::string& name, CsaWeights& w) {
    add_ln(out, name + ".ln", w.ln);
    add_conv(out, name + ".q_pw", w.q_pw);
    add_conv(out, name + ".k_pw", w.k_pw);
    add_conv(out, name + ".v_pw", w.v_pw);
    add_dw(out, name + ".q_dw", w.q_dw);
    add_dw(out, name + ".k_dw", w.k_dw);
    add_dw(out, name + ".v_dw", w.v_dw);
}

void add_tsab(std::vector<TensorRef>& out, const std::string& name, TsabWeights& w) {
    add_csa(out, name + ".csa", w.csa);
    add_ln(out, name + ".ffn.ln", w.ffn.ln);
    add_conv(out, name + ".ffn.expand", w.ffn.expand);
    add_conv(out, name + ".ffn.contract", w.ffn.contract);
}

void add_gcab(std::vector<TensorRef>& out, const std::string& name, GcabWeights& w) {
    add_conv(out, name + ".conv", w.conv);
    add_conv(out, name + ".gate_pw1", w.gate_pw1);
    add_dw(out, name + ".gate_dw", w.gate_dw);
    add_conv(out, name + ".gate_pw2", w.gate_pw2);
    add_conv(out, name + ".se_reduce", w.se_reduce);
    add_conv(out, name + ".se_expand", w.se_expand);
}

void add_ffb(std::vector<TensorRef>& out, const std::string& name, FfbWeights& w) {
    add_conv(out, name + ".v_pw1", w.v_pw1);
    add_conv(out, name + ".v_pw2", w.v_pw2);
    add_conv(out, name + ".w_pw1", w.w_pw1);
    add_conv(out, name + ".w_pw2", w.w_pw2);
}

std::vector<TensorRef> tensor_refs(NetWeights& w) {
    std::vector<TensorRef> out;
    add_conv(out, "s_shallow", w.s_shallow);
    for (size_t i = 0; i < w.tsabs.size(); ++i)
        add_tsab(out, "tsab" + std::to_string(i), w.tsabs[i]);
    add_conv(out, "s_down1", w.s_down1);
    add_conv(out, "s_down2", w.s_down2);
    out.push_back({"head.w1",
                   {static_cast<uint32_t>(w.head.hidden), static_cast<uint32_t>(w.head.in_ch)},
                   &w.head.w1});
    out.push_back({"head.b1", {static_cast<uint32_t>(w.head.hidden)}, &w.head.b1});
    out.push_back({"head.w2", {2u, static_cast<uint32_t>(w.head.hidden)}, &w.head.w2});
    out.push_back({"head.b2", {2u}, &w.head.b2});
    add_conv(out, "i_shallow", w.i_shallow);
    auto add_site = [&](const char* site, std::vector<GcabWeights>& blocks) {
        for (size_t i = 0; i < blocks.size(); ++i)
            add_gcab(out, std::string(site) + std::to_string(i), blocks[i]);
    };
    add_site("enc1.", w.enc1);
    add_site("enc2.", w.enc2);
    add_site("bottleneck.", w.bottleneck);
    add_site("dec2.", w.dec2);
    add_site("dec1.", w.dec1);
    add_conv(out, "i_down1", w.i_down1);
    add_conv(out, "i_down2", w.i_down2);
    add_ffb(out, "ffb1", w.ffb1);
    add_ffb(out, "ffb2", w.ffb2);
    add_ffb(out, "ffb3", w.ffb3);
    add_conv(out, "up2_pw", w.up2_pw);
    add_conv(out, "up1_pw", w.up1_pw);
    add_conv(out, "reduce2", w.reduce2);
    add_conv(out, "reduce1", w.reduce1);
    add_conv(out, "out_conv", w.out_conv);
    return out;
}

constexpr char kMagic[4] = {'U', 'D', 'C', 'W'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("truncated weight bundle");
    return v;
}

}  // namespace

void save_weights(const NetWeights& w, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    for (int r : w.cfg.tsab_counts) write_u32(os, static_cast<uint32_t>(r));
    write_u32(os, static_cast<uint32_t>(w.cfg.gcab_count));
    for (int c : w.cfg.widths) write_u32(os, static_cast<uint32_t>(c));
    write_u32(os, w.cfg.spatial_mixing ? 1 : 0);
    write_u32(os, w.cfg.scale_attention_logits ? 1 : 0);

    auto refs = tensor_refs(const_cast<NetWeights&>(w));
    write_u32(os, static_cast<uint32_t>(refs.size()));
    for (const auto& r : refs) {
        write_u32(os, static_cast<uint32_t>(r.name.size()));
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        write_u32(os, static_cast<uint32_t>(r.dims.size()));
        for (uint32_t d : r.dims) write_u32(os, d);
        for (double v : *r.data) {
            const float f = static_cast<float>(v);
            os.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    os.close();
    if (!os) throw std::runtime_error("write failed: " + path);
}

NetWeights load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a weight bundle: " + path);
    if (read_u32(is) != kVersion) throw std::runtime_error("unsupported bundle version");

    NetConfig cfg;
    for (int& r : cfg.tsab_counts) r = static_cast<int>(read_u32(is));
    cfg.gcab_count = static_cast<int>(read_u32(is));
    for (int& c : cfg.widths) c = static_cast<int>(read_u32(is));
    cfg.spatial_mixing = read_u32(is) != 0;
    cfg.scale_attention_logits = read_u32(is) != 0;

    NetWeights w = zero_weights(cfg);
    auto refs = tensor_refs(w);
    std::map<std::string, TensorRef*> by_name;
    for (auto& r : refs) by_name[r.name] = &r;

    const uint32_t count = read_u32(is);
    if (count != refs.size()) throw std::runtime_error("bundle tensor count mismatch");
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint32_t ndims = read_u32(is);
        size_t n = 1;
        for (uint32_t d = 0; d < ndims; ++d) n *= read_u32(is);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("unknown tensor in bundle: " + name);
        if (it->second->data->size() != n)
            throw std::runtime_error("tensor size mismatch: " + name);
        for (size_t e = 0; e < n; ++e) {
            float f = 0.0f;
            is.read(reinterpret_cast<char*>(&f), 4);
            (*it->second->data)[e] = static_cast<double>(f);
        }
        if (!is) throw std::runtime_error("truncated weight bundle");
    }
    return w;
}

// ---------------------------------------------------------------------------
// test helpers and the self-test

std::vector<int> random_permutation(int n, SplitMix64& rng) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
        std::swap(p[i], p[j]);
    }
    return p;
}

FeatureMap permute_pixels(const FeatureMap& x, const std::vector<int>& perm) {
    const size_t npix = static_cast<size_t>(x.height) * x.width;
    if (perm.size() != npix) throw std::invalid_argument("permutation size mismatch");
    FeatureMap out(x.height, x.width, x.channels);
    for (size_t p = 0; p < npix; ++p)
        for (int c = 0; c < x.channels; ++c)
            out.data[p * x.channels + c] = x.data[static_cast<size_t>(perm[p]) * x.channels + c];
    return out;
}

FeatureMap random_feature_map(int h, int w, int c, SplitMix64& rng) {
    FeatureMap x(h, w, c);
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    return x;
}

LdrImage cyclic_shift(const LdrImage& img, int dy, int dx) {
    LdrImage out(img.height(), img.width(), 0.0, img.bit_depth());
    for (int y = 0; y < img.height(); ++y) {
        const int sy = wrap(y - dy, img.height());
        for (int x = 0; x < img.width(); ++x) {
            const int sx = wrap(x - dx, img.width());
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

namespace {

double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

double max_abs_diff(const LdrImage& a, const LdrImage& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.sample_count(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

struct Check {
    std::ostream& log;
    bool all_ok = true;

    void report(bool ok, const std::string& what, double value = 0.0, bool show = false) {
        if (ok) {
            log << "ok: " << what;
        } else {
            all_ok = false;
            log << "FAIL: " << what;
        }
        if (show) log << " (" << value << ")";
        log << "\n";
    }
};

}  // namespace

bool run_selftest(uint64_t seed, int size, const NetConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (size % 4 != 0 || size < 8) throw std::invalid_argument("self-test size must be >= 8 and divisible by 4");
    Check chk{log};
    SplitMix64 rng(mix_seed(seed, 0x5E1F));

    NetWeights w = init_weights(cfg, seed);
    NetWeights zw = zero_weights(cfg);
    const int c0 = cfg.widths[0];

    // attention rows are probability vectors
    {
        FeatureMap x = random_feature_map(size, size, c0, rng);
        auto a = csa_attention(x, w.tsabs[0].csa);
        double worst = 0.0;
        for (int i = 0; i < c0; ++i) {
            double s = 0.0;
            for (int j = 0; j < c0; ++j) s += a[static_cast<size_t>(i) * c0 + j];
            worst = std::max(worst, std::abs(s - 1.0));
        }
        chk.report(worst < 1e-6, "attention rows sum to 1", worst, true);
    }

    // permutation equivariance of the attention blocks
    {
        FeatureMap x = random_feature_map(size, size, c0, rng);
        FeatureMap base_csa = csa_forward(x, w.tsabs[0].csa);
        FeatureMap base_tsab = tsab_forward(x, w.tsabs[0]);
        double worst_csa = 0.0, worst_tsab = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            auto perm = random_permutation(size * size, rng);
            FeatureMap xp = permute_pixels(x, perm);
            worst_csa = std::max(
                worst_csa, max_abs_diff(csa_forward(xp, w.tsabs[0].csa), permute_pixels(base_csa, perm)));
            worst_tsab = std::max(
                worst_tsab, max_abs_diff(tsab_forward(xp, w.tsabs[0]), permute_pixels(base_tsab, perm)));
        }
        chk.report(worst_csa < 1e-6, "channel attention is permutation-equivariant", worst_csa, true);
        chk.report(worst_tsab < 1e-6, "attention block is permutation-equivariant", worst_tsab, true);
    }

    // pooled head ignores pixel order
    {
        FeatureMap u3 = random_feature_map(size / 4, size / 4, cfg.widths[2], rng);
        auto [a0, m0] = head_forward(u3, w.head);
        double worst = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            auto perm = random_permutation((size / 4) * (size / 4), rng);
            auto [a1, m1] = head_forward(permute_pixels(u3, perm), w.head);
            worst = std::max({worst, std::abs(a1 - a0), std::abs(m1 - m0)});
        }
        chk.report(worst < 1e-6, "pooled head is permutation-invariant", worst, true);
    }

    // fusion is affine in its first argument
    {
        FeatureMap u = random_feature_map(size, size, c0, rng);
        FeatureMap ones(size, size, c0, 1.0);
        FeatureMap zeros(size, size, c0, 0.0);
        FeatureMap f_one = ffb_forward(ones, u, w.ffb1);
        FeatureMap f_zero = ffb_forward(zeros, u, w.ffb1);
        // implied per-sample scale and shift
        FeatureMap v = f_one;
        for (size_t i = 0; i < v.data.size(); ++i) v.data[i] -= f_zero.data[i];
        FeatureMap f = random_feature_map(size, size, c0, rng);
        FeatureMap got = ffb_forward(f, u, w.ffb1);
        double worst = 0.0;
        for (size_t i = 0; i < got.data.size(); ++i)
            worst = std::max(worst,
                             std::abs(got.data[i] - (v.data[i] * f.data[i] + f_zero.data[i])));
        chk.report(worst < 1e-6, "fusion is affine in the fused feature", worst, true);

        FfbWeights identity = zw.ffb1;
        std::fill(identity.v_pw2.b.begin(), identity.v_pw2.b.end(), 1.0);
        const double d_id = max_abs_diff(ffb_forward(f, u, identity), f);
        chk.report(d_id == 0.0, "fusion with unit scale and zero shift is identity", d_id, true);

        const double d_const =
            max_abs_diff(ffb_forward(f, u, zw.ffb1), ffb_forward(ones, u, zw.ffb1));
        chk.report(d_const == 0.0, "fusion with zero scale ignores the fused feature", d_const, true);
    }

    // zero projections leave only the residual paths
    {
        FeatureMap x = random_feature_map(size, size, c0, rng);
        const double d_csa = max_abs_diff(csa_forward(x, zw.tsabs[0].csa), x);
        const double d_tsab = max_abs_diff(tsab_forward(x, zw.tsabs[0]), x);
        const double d_gcab = max_abs_diff(gcab_forward(x, zw.enc1[0]), x);
        chk.report(d_csa == 0.0, "zero-weight channel attention is identity", d_csa, true);
        chk.report(d_tsab == 0.0, "zero-weight attention block is identity", d_tsab, true);
        chk.report(d_gcab == 0.0, "zero-weight gated block is identity", d_gcab, true);
    }

    // full forward: shape, finiteness, determinism, shift equivariance
    {
        LdrImage input(size, size);
        SplitMix64 irng(mix_seed(seed, 0x1A9E));
        for (size_t i = 0; i < input.sample_count(); ++i) input.data()[i] = irng.uniform01();

        NetOutput out = net_forward(input, w);
        const bool shape_ok =
            out.restored.height() == size && out.restored.width() == size;
        chk.report(shape_ok, "forward output has the input shape");
        bool finite = std::isfinite(out.alpha_hat) && std::isfinite(out.m_hat);
        for (size_t i = 0; finite && i < out.restored.sample_count(); ++i)
            finite = std::isfinite(out.restored.data()[i]);
        chk.report(finite, "forward output is finite");

        NetWeights w_again = init_weights(cfg, seed);
        LdrImage input_again(size, size);
        SplitMix64 irng2(mix_seed(seed, 0x1A9E));
        for (size_t i = 0; i < input_again.sample_count(); ++i)
            input_again.data()[i] = irng2.uniform01();
        NetOutput out_again = net_forward(input_again, w_again);
        const bool det = max_abs_diff(out.restored, out_again.restored) == 0.0 &&
                         out.alpha_hat == out_again.alpha_hat && out.m_hat == out_again.m_hat;
        chk.report(det, "same seed reproduces the forward bit-for-bit");

        NetOutput shifted = net_forward(cyclic_shift(input, 4, 8), w);
        const double d_img = max_abs_diff(shifted.restored, cyclic_shift(out.restored, 4, 8));
        const double d_par =
            std::max(std::abs(shifted.alpha_hat - out.alpha_hat), std::abs(shifted.m_hat - out.m_hat));
        chk.report(d_img < 1e-6 && d_par < 1e-6, "forward is equivariant to 4-pixel cyclic shifts",
                   std::max(d_img, d_par), true);
    }

    // loss arithmetic
    {
        LdrImage b(16, 16, 0.0);
        LdrImage half(16, 16, 0.5);
        const LossBreakdown perfect = loss_total(b, b, 0.7, 0.7, 0.3, 0.3);
        chk.report(perfect.total == 0.0 && perfect.param == 0.0 && perfect.image == 0.0,
                   "loss vanishes for perfect predictions");
        const LossBreakdown p_only = loss_total(b, b, 0.8, 0.7, 0.3, 0.3);
        chk.report(std::abs(p_only.total - 0.001) < 1e-15,
                   "parameter term enters with weight 0.1", p_only.total, true);
        const LossBreakdown i_only = loss_total(half, b, 0.7, 0.7, 0.3, 0.3);
        chk.report(i_only.total == 0.5, "image term enters with weight 1", i_only.total, true);
        SplitMix64 lrng(mix_seed(seed, 0x105));
        LdrImage ra(16, 16), rb(16, 16);
        for (size_t i = 0; i < ra.sample_count(); ++i) {
            ra.data()[i] = lrng.uniform01();
            rb.data()[i] = lrng.uniform01();
        }
        const LossBreakdown l = loss_total(ra, rb, 0.81, 0.7, 0.4, 0.35);
        chk.report(l.total == 0.1 * l.param + 1.0 * l.image, "loss decomposes exactly");
    }

    log << (chk.all_ok ? "self-test passed" : "self-test FAILED") << "\n";
    return chk.all_ok;
}

}  // namespace udc
