#include "udc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace udc {

namespace {

void check_same_shape(int h1, int w1, int h2, int w2) {
    if (h1 != h2 || w1 != w2) throw std::invalid_argument("metric inputs must have identical dimensions");
}

double mse_of(const double* a, const double* b, size_t n) {
    double sum = 0.0, comp = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        const double term = d * d - comp;
        const double next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    return sum / static_cast<double>(n);
}

double psnr_from_mse(double mse) {
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWin> ssim_taps() {
    std::array<double, kWin> taps{};
    const int half = kWin / 2;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - half;
        taps[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Valid-region separable filter: output is (h-10) x (w-10).
Plane filter_valid(const Plane& src, const std::array<double, kWin>& taps) {
    const int oh = src.height - (kWin - 1);
    const int ow = src.width - (kWin - 1);
    Plane horiz(src.height, ow);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kWin; ++t) acc += taps[t] * src.at(y, x + t);
            horiz.at(y, x) = acc;
        }
    }
    Plane out(oh, ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kWin; ++t) acc += taps[t] * horiz.at(y + t, x);
            out.at(y, x) = acc;
        }
    }
    return out;
}

Plane channel_plane(const double* data, int h, int w, int c) {
    Plane p(h, w);
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] = data[i * 3 + c];
    return p;
}

Plane hadamard(const Plane& a, const Plane& b) {
    Plane p = a;
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] *= b.data[i];
    return p;
}

double ssim_impl(const double* ref, const double* test, int h, int w) {
    if (h < kWin || w < kWin)
        throw std::invalid_argument("ssim requires both image sides to be at least 11");
    const auto taps = ssim_taps();
    constexpr double c1 = kK1 * kK1;
    constexpr double c2 = kK2 * kK2;
    double channel_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel_plane(ref, h, w, c);
        const Plane y = channel_plane(test, h, w, c);
        const Plane mu_x = filter_valid(x, taps);
        const Plane mu_y = filter_valid(y, taps);
        const Plane xx = filter_valid(hadamard(x, x), taps);
        const Plane yy = filter_valid(hadamard(y, y), taps);
        const Plane xy = filter_valid(hadamard(x, y), taps);
        double acc = 0.0, comp = 0.0;
        for (size_t i = 0; i < mu_x.data.size(); ++i) {
            const double mx = mu_x.data[i];
            const double my = mu_y.data[i];
            const double vx = xx.data[i] - mx * mx;
            const double vy = yy.data[i] - my * my;
            const double cov = xy.data[i] - mx * my;
            const double score = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                                 ((mx * mx + my * my + c1) * (vx + vy + c2));
            const double term = score - comp;
            const double next = acc + term;
            comp = (next - acc) - term;
            acc = next;
        }
        channel_sum += acc / static_cast<double>(mu_x.data.size());
    }
    return channel_sum / 3.0;
}

}  // namespace

double psnr(const HdrImage& ref, const HdrImage& test) {
    check_same_shape(ref.height(), ref.width(), test.height(), test.width());
    return psnr_from_mse(mse_of(ref.data(), test.data(), ref.sample_count()));
}

double psnr(const LdrImage& ref, const LdrImage& test) {
    check_same_shape(ref.height(), ref.width(), test.height(), test.width());
    return psnr_from_mse(mse_of(ref.data(), test.data(), ref.sample_count()));
}

double ssim(const LdrImage& ref, const LdrImage& test) {
    check_same_shape(ref.height(), ref.width(), test.height(), test.width());
    return ssim_impl(ref.data(), test.data(), ref.height(), ref.width());
}

double ssim(const HdrImage& ref, const HdrImage& test) {
    check_same_shape(ref.height(), ref.width(), test.height(), test.width());
    return ssim_impl(ref.data(), test.data(), ref.height(), ref.width());
}

MetricReport compare_images(const LdrImage& ref, const LdrImage& test) {
    MetricReport r;
    r.psnr = psnr(ref, test);
    r.ssim = ssim(ref, test);
    return r;
}

HsvHistogram make_histogram(int bins) {
    if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    HsvHistogram h;
    h.bins_h.assign(bins, 0);
    h.bins_s.assign(bins, 0);
    h.bins_v.assign(bins, 0);
    return h;
}

void accumulate_hsv(HsvHistogram& hist, const LdrImage& img) {
    img.validate();
    const int bins = hist.bin_count();
    auto bin_of = [bins](double v, double range) {
        int b = static_cast<int>(v / range * bins);
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        return b;
    };
    const double* d = img.data();
    const size_t n = static_cast<size_t>(img.height()) * img.width();
    for (size_t i = 0; i < n; ++i) {
        double h, s, v;
        hsv_from_rgb(d[i * 3], d[i * 3 + 1], d[i * 3 + 2], h, s, v);
        ++hist.bins_h[bin_of(h, 360.0)];
        ++hist.bins_s[bin_of(s, 1.0)];
        ++hist.bins_v[bin_of(v, 1.0)];
        ++hist.total;
    }
}

HsvHistogram hsv_histograms(const std::vector<LdrImage>& images, int bins) {
    if (images.empty()) throw std::invalid_argument("histogram accumulation needs at least one image");
    HsvHistogram hist = make_histogram(bins);
    for (const auto& img : images) accumulate_hsv(hist, img);
    return hist;
}

void merge(HsvHistogram& into, const HsvHistogram& from) {
    if (into.bin_count() != from.bin_count()) throw std::invalid_argument("histogram bin counts differ");
    for (int i = 0; i < into.bin_count(); ++i) {
        into.bins_h[i] += from.bins_h[i];
        into.bins_s[i] += from.bins_s[i];
        into.bins_v[i] += from.bins_v[i];
    }
    into.total += from.total;
}

std::array<double, 3> hist_distance(const HsvHistogram& a, const HsvHistogram& b) {
    if (a.bin_count() != b.bin_count()) throw std::invalid_argument("histogram bin counts differ");
    if (a.total == 0 || b.total == 0) throw std::invalid_argument("histogram is empty");
    auto l1 = [&](const std::vector<uint64_t>& pa, const std::vector<uint64_t>& pb) {
        double d = 0.0;
        for (size_t i = 0; i < pa.size(); ++i)
            d += std::abs(static_cast<double>(pa[i]) / static_cast<double>(a.total) -
                          static_cast<double>(pb[i]) / static_cast<double>(b.total));
        return d;
    };
    return {l1(a.bins_h, b.bins_h), l1(a.bins_s, b.bins_s), l1(a.bins_v, b.bins_v)};
}

}  // namespace udc
