#include "udc/psf.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "udc/image_io.hpp"

namespace udc {

// The FFTW planner is not thread-safe; plan creation/destruction everywhere
// in this library goes through this lock. Execution is re-entrant.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

double PsfKernel::sum() const {
    double s = 0.0, comp = 0.0;
    for (double t : taps) {
        double y = t - comp;
        double u = s + y;
        comp = (u - s) - y;
        s = u;
    }
    return s;
}

PsfKernel make_kernel(int height, int width, std::vector<double> taps, std::string id) {
    if (height < 1 || width < 1 || height % 2 == 0 || width % 2 == 0) {
        throw std::invalid_argument("kernel dimensions must be odd and positive, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    if (taps.size() != static_cast<size_t>(height) * width) {
        throw std::invalid_argument("kernel tap count does not match dimensions");
    }
    double s = 0.0;
    for (double& t : taps) {
        if (!std::isfinite(t)) throw std::invalid_argument("kernel tap is not finite");
        if (t < 0.0) t = 0.0;
        s += t;
    }
    if (s <= 0.0) throw std::invalid_argument("kernel sum is nonpositive after clamping");
    for (double& t : taps) t /= s;
    PsfKernel k;
    k.height = height;
    k.width = width;
    k.taps = std::move(taps);
    k.id = std::move(id);
    return k;
}

PsfKernel delta_kernel() { return make_kernel(1, 1, {1.0}, "delta"); }

PsfKernel gaussian_kernel(int size, double sigma, std::string id) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_kernel sigma must be > 0");
    std::vector<double> taps(static_cast<size_t>(size) * size);
    int r = size / 2;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double dy = y - r, dx = x - r;
            taps[static_cast<size_t>(y) * size + x] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    }
    return make_kernel(size, size, std::move(taps), std::move(id));
}

namespace {

PsfKernel load_kernel_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open kernel file: " + path);
    int kh, kw;
    if (!(in >> kh >> kw)) throw std::runtime_error("kernel header parse failure: " + path);
    if (kh < 1 || kw < 1) throw std::runtime_error("kernel dimensions must be positive: " + path);
    std::vector<double> taps(static_cast<size_t>(kh) * kw);
    for (double& t : taps) {
        if (!(in >> t)) throw std::runtime_error("kernel tap parse failure: " + path);
    }
    return make_kernel(kh, kw, std::move(taps), std::filesystem::path(path).stem().string());
}

}  // namespace

PsfKernel load_kernel(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open kernel file: " + path);
    char magic[2] = {};
    probe.read(magic, 2);
    probe.close();
    if (magic[0] == 'P' && (magic[1] == 'f' || magic[1] == 'F')) {
        Plane p = read_pfm_gray(path);
        return make_kernel(p.height, p.width, std::move(p.data),
                           std::filesystem::path(path).stem().string());
    }
    return load_kernel_text(path);
}

void save_kernel_text(const PsfKernel& k, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << k.height << " " << k.width << "\n";
    out.precision(17);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            out << k.at(y, x) << (x + 1 == k.width ? '\n' : ' ');
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

PsfKernel gen_diffraction_psf(const Plane& aperture_mask, int out_h, int out_w, int oversample) {
    if (aperture_mask.height < 1 || aperture_mask.width < 1) {
        throw std::invalid_argument("aperture mask is empty");
    }
    if (oversample < 1) throw std::invalid_argument("oversample must be >= 1");
    if (out_h < 1 || out_w < 1 || out_h % 2 == 0 || out_w % 2 == 0) {
        throw std::invalid_argument("diffraction PSF output sides must be odd and positive");
    }
    bool any_open = false;
    for (double v : aperture_mask.data) {
        if (v > 0.0) any_open = true;
    }
    if (!any_open) throw std::invalid_argument("aperture mask has no open pixel");

    const int gh = aperture_mask.height * oversample;
    const int gw = aperture_mask.width * oversample;
    if (out_h > gh || out_w > gw) {
        throw std::invalid_argument("requested PSF size " + std::to_string(out_h) + "x" +
                                    std::to_string(out_w) + " exceeds FFT grid " +
                                    std::to_string(gh) + "x" + std::to_string(gw));
    }

    size_t n = static_cast<size_t>(gh) * gw;
    fftw_complex* in = fftw_alloc_complex(n);
    fftw_complex* out = fftw_alloc_complex(n);
    for (size_t i = 0; i < n; ++i) in[i][0] = in[i][1] = 0.0;
    for (int y = 0; y < aperture_mask.height; ++y) {
        for (int x = 0; x < aperture_mask.width; ++x) {
            in[static_cast<size_t>(y) * gw + x][0] = aperture_mask.at(y, x) > 0.0 ? 1.0 : 0.0;
        }
    }

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_2d(gh, gw, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    // Power spectrum, centered (fftshift), cropped about the DC tap. Crop
    // index y holds frequency y - out_h/2.
    std::vector<double> taps(static_cast<size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            int sy = ((y - out_h / 2) % gh + gh) % gh;
            int sx = ((x - out_w / 2) % gw + gw) % gw;
            double re = out[static_cast<size_t>(sy) * gw + sx][0];
            double im = out[static_cast<size_t>(sy) * gw + sx][1];
            taps[static_cast<size_t>(y) * out_w + x] = re * re + im * im;
        }
    }
    fftw_free(in);
    fftw_free(out);
    return make_kernel(out_h, out_w, std::move(taps), "diffraction");
}

}  // namespace udc
