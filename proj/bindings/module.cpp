#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <sstream>

#include "udc/metrics.hpp"
#include "udc/netref.hpp"
#include "udc/pipeline.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

udc::HdrImage hdr_from_array(const DoubleArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw std::invalid_argument("expected an (H, W, 3) array");
    udc::HdrImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(img.data(), a.data(), sizeof(double) * img.sample_count());
    return img;
}

udc::LdrImage ldr_from_array(const DoubleArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw std::invalid_argument("expected an (H, W, 3) array");
    udc::LdrImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(img.data(), a.data(), sizeof(double) * img.sample_count());
    return img;
}

py::array_t<double> array_from_hdr(const udc::HdrImage& img) {
    py::array_t<double> a({static_cast<py::ssize_t>(img.height()),
                           static_cast<py::ssize_t>(img.width()), static_cast<py::ssize_t>(3)});
    std::memcpy(a.mutable_data(), img.data(), sizeof(double) * img.sample_count());
    return a;
}

py::array_t<double> array_from_ldr(const udc::LdrImage& img) {
    py::array_t<double> a({static_cast<py::ssize_t>(img.height()),
                           static_cast<py::ssize_t>(img.width()), static_cast<py::ssize_t>(3)});
    std::memcpy(a.mutable_data(), img.data(), sizeof(double) * img.sample_count());
    return a;
}

udc::PsfKernel kernel_from_array(const DoubleArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("kernel must be a 2-D array");
    std::vector<double> taps(a.data(), a.data() + a.size());
    return udc::make_kernel(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                            std::move(taps));
}

py::array_t<double> array_from_kernel(const udc::PsfKernel& k) {
    py::array_t<double> a({static_cast<py::ssize_t>(k.height), static_cast<py::ssize_t>(k.width)});
    std::memcpy(a.mutable_data(), k.taps.data(), sizeof(double) * k.taps.size());
    return a;
}

udc::ToneCurve curve_of(double c) { return {udc::ToneCurveKind::ReinhardOffset, c}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Scattering-aware under-display-camera degradation model";

    m.def(
        "compute_m", [](const DoubleArray& img) { return udc::compute_m(hdr_from_array(img)); },
        py::arg("image"), "Gray-mean veiling level of a linear RGB image");

    m.def(
        "gaussian_kernel",
        [](int size, double sigma) { return array_from_kernel(udc::gaussian_kernel(size, sigma)); },
        py::arg("size"), py::arg("sigma"), "Normalized isotropic Gaussian blur kernel");

    m.def(
        "convolve",
        [](const DoubleArray& img, const DoubleArray& kernel) {
            return array_from_hdr(udc::convolve_fft(hdr_from_array(img), kernel_from_array(kernel)));
        },
        py::arg("image"), py::arg("kernel"),
        "Per-channel circular convolution (frequency-domain)");

    m.def(
        "tonemap_forward",
        [](const DoubleArray& img, double c) {
            return array_from_ldr(udc::tonemap_forward(hdr_from_array(img), curve_of(c)));
        },
        py::arg("image"), py::arg("c") = 0.25, "x/(x+c) tone curve, clipped to [0,1]");

    m.def(
        "tonemap_inverse",
        [](const DoubleArray& img, double c) {
            return array_from_hdr(udc::tonemap_inverse(ldr_from_array(img), curve_of(c)));
        },
        py::arg("image"), py::arg("c") = 0.25, "Inverse tone curve (saturation clamped)");

    m.def(
        "degrade",
        [](const DoubleArray& clean, const DoubleArray& kernel, double alpha,
           std::optional<double> m, double sigma, uint64_t seed, double tc_c) {
            udc::HdrImage b = hdr_from_array(clean);
            const double m_val = m ? *m : udc::compute_m(b);
            udc::DegradeResult r = udc::degrade(b, udc::ScatteringParams::from_alpha(alpha, m_val),
                                                kernel_from_array(kernel), {sigma, seed},
                                                curve_of(tc_c));
            return py::make_tuple(array_from_ldr(r.image), array_from_hdr(r.linear));
        },
        py::arg("clean"), py::arg("kernel"), py::arg("alpha"), py::arg("m") = std::nullopt,
        py::arg("sigma") = 0.0, py::arg("seed") = 0, py::arg("tc_c") = 0.25,
        "Synthesize a degraded image; returns (tone-mapped, pre-tone-map linear)");

    m.def(
        "restore",
        [](const DoubleArray& degraded, const DoubleArray& kernel, double alpha, double m,
           double eps, double tc_c) {
            return array_from_hdr(udc::restore_classical(
                ldr_from_array(degraded), udc::ScatteringParams::from_alpha(alpha, m),
                kernel_from_array(kernel), curve_of(tc_c), eps));
        },
        py::arg("degraded"), py::arg("kernel"), py::arg("alpha"), py::arg("m"),
        py::arg("eps") = 1e-3, py::arg("tc_c") = 0.25,
        "Closed-form inverse of degrade for known parameters");

    m.def(
        "estimate",
        [](const DoubleArray& degraded_lin, const DoubleArray& clean, const DoubleArray& kernel) {
            udc::ParamEstimate e = udc::estimate_params(hdr_from_array(degraded_lin),
                                                        hdr_from_array(clean),
                                                        kernel_from_array(kernel));
            py::dict d;
            d["alpha"] = e.alpha;
            d["m"] = e.m;
            d["residual"] = e.residual_rms;
            d["m_valid"] = e.m_valid;
            return d;
        },
        py::arg("degraded_lin"), py::arg("clean"), py::arg("kernel"),
        "Least-squares recovery of (alpha, m) from a pre-tone-map pair");

    m.def(
        "psnr",
        [](const DoubleArray& ref, const DoubleArray& test) {
            return udc::psnr(hdr_from_array(ref), hdr_from_array(test));
        },
        py::arg("ref"), py::arg("test"), "Peak signal-to-noise ratio, peak 1");

    m.def(
        "ssim",
        [](const DoubleArray& ref, const DoubleArray& test) {
            return udc::ssim(ldr_from_array(ref), ldr_from_array(test));
        },
        py::arg("ref"), py::arg("test"), "Mean single-scale SSIM over RGB channels");

    m.def(
        "net_selftest",
        [](uint64_t seed, int size, const std::string& config, int gcabs) {
            udc::NetConfig cfg =
                config == "full" ? udc::NetConfig::full() : udc::NetConfig::light();
            if (gcabs > 0) cfg.gcab_count = gcabs;
            std::ostringstream log;
            const bool ok = udc::run_selftest(seed, size, cfg, log);
            return py::make_tuple(ok, log.str());
        },
        py::arg("seed") = 0, py::arg("size") = 16, py::arg("config") = "light",
        py::arg("gcabs") = 4, "Run the network-block invariant suite; returns (ok, log)");
}
