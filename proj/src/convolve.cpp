#include "udc/convolve.hpp"

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace udc {

std::mutex& fftw_planner_mutex();  // defined in psf.cpp

namespace {

void check_fit(const HdrImage& img, const PsfKernel& k) {
    if (k.height > img.height() || k.width > img.width()) {
        throw std::invalid_argument("kernel " + std::to_string(k.height) + "x" +
                                    std::to_string(k.width) + " larger than image " +
                                    std::to_string(img.height()) + "x" +
                                    std::to_string(img.width()));
    }
}

// Embeds the kernel into an H x W grid with its center tap at the origin and
// negative offsets wrapped, matching circular convolution.
std::vector<double> embed_kernel(const PsfKernel& k, int h, int w) {
    std::vector<double> grid(static_cast<size_t>(h) * w, 0.0);
    int cy = k.height / 2, cx = k.width / 2;
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            int gy = ((y - cy) % h + h) % h;
            int gx = ((x - cx) % w + w) % w;
            grid[static_cast<size_t>(gy) * w + gx] += k.at(y, x);
        }
    }
    return grid;
}

struct R2cPlan {
    int h, w;
    size_t spec_size;
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
    double* real = nullptr;
    fftw_complex* spec = nullptr;

    R2cPlan(int h_, int w_) : h(h_), w(w_), spec_size(static_cast<size_t>(h_) * (w_ / 2 + 1)) {
        real = fftw_alloc_real(static_cast<size_t>(h) * w);
        spec = fftw_alloc_complex(spec_size);
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fwd = fftw_plan_dft_r2c_2d(h, w, real, spec, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_2d(h, w, spec, real, FFTW_ESTIMATE);
    }
    ~R2cPlan() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
        fftw_free(real);
        fftw_free(spec);
    }
    R2cPlan(const R2cPlan&) = delete;
    R2cPlan& operator=(const R2cPlan&) = delete;
};

}  // namespace

HdrImage convolve_fft(const HdrImage& img, const PsfKernel& k) {
    check_fit(img, k);
    if (k.height == 1 && k.width == 1) {
        HdrImage scaled = img;
        for (size_t i = 0; i < scaled.sample_count(); ++i) scaled.data()[i] *= k.taps[0];
        return scaled;
    }
    const int h = img.height(), w = img.width();
    const size_t npix = static_cast<size_t>(h) * w;

    R2cPlan plan(h, w);

    std::vector<double> kgrid = embed_kernel(k, h, w);
    std::copy(kgrid.begin(), kgrid.end(), plan.real);
    fftw_execute(plan.fwd);
    std::vector<std::complex<double>> kspec(plan.spec_size);
    for (size_t i = 0; i < plan.spec_size; ++i) kspec[i] = {plan.spec[i][0], plan.spec[i][1]};

    HdrImage out(h, w);
    const double scale = 1.0 / static_cast<double>(npix);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < npix; ++i) plan.real[i] = img.data()[i * 3 + c];
        fftw_execute(plan.fwd);
        for (size_t i = 0; i < plan.spec_size; ++i) {
            std::complex<double> v{plan.spec[i][0], plan.spec[i][1]};
            v *= kspec[i];
            plan.spec[i][0] = v.real();
            plan.spec[i][1] = v.imag();
        }
        fftw_execute(plan.inv);
        for (size_t i = 0; i < npix; ++i) out.data()[i * 3 + c] = plan.real[i] * scale;
    }
    return out;
}

HdrImage deconvolve_wiener(const HdrImage& img, const PsfKernel& k, double eps) {
    check_fit(img, k);
    if (!(eps > 0.0)) throw std::invalid_argument("wiener eps must be > 0");
    const int h = img.height(), w = img.width();
    const size_t npix = static_cast<size_t>(h) * w;

    R2cPlan plan(h, w);

    std::vector<double> kgrid = embed_kernel(k, h, w);
    std::copy(kgrid.begin(), kgrid.end(), plan.real);
    fftw_execute(plan.fwd);
    std::vector<std::complex<double>> kspec(plan.spec_size);
    for (size_t i = 0; i < plan.spec_size; ++i) kspec[i] = {plan.spec[i][0], plan.spec[i][1]};

    HdrImage out(h, w);
    const double scale = 1.0 / static_cast<double>(npix);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < npix; ++i) plan.real[i] = img.data()[i * 3 + c];
        fftw_execute(plan.fwd);
        for (size_t i = 0; i < plan.spec_size; ++i) {
            std::complex<double> y{plan.spec[i][0], plan.spec[i][1]};
            std::complex<double> v = std::conj(kspec[i]) * y / (std::norm(kspec[i]) + eps);
            plan.spec[i][0] = v.real();
            plan.spec[i][1] = v.imag();
        }
        fftw_execute(plan.inv);
        for (size_t i = 0; i < npix; ++i) out.data()[i * 3 + c] = plan.real[i] * scale;
    }
    return out;
}

HdrImage convolve_direct(const HdrImage& img, const PsfKernel& k) {
    check_fit(img, k);
    const int h = img.height(), w = img.width();
    const int cy = k.height / 2, cx = k.width / 2;
    HdrImage out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            for (int ky = 0; ky < k.height; ++ky) {
                int sy = ((y - (ky - cy)) % h + h) % h;
                for (int kx = 0; kx < k.width; ++kx) {
                    int sx = ((x - (kx - cx)) % w + w) % w;
                    double t = k.at(ky, kx);
                    acc[0] += t * img.at(sy, sx, 0);
                    acc[1] += t * img.at(sy, sx, 1);
                    acc[2] += t * img.at(sy, sx, 2);
                }
            }
            out.at(y, x, 0) = acc[0];
            out.at(y, x, 1) = acc[1];
            out.at(y, x, 2) = acc[2];
        }
    }
    return out;
}

}  // namespace udc
