#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "udc/metrics.hpp"
#include "udc/netref.hpp"
#include "udc/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_degraded(const udc::LdrImage& img, const std::string& path) {
    const udc::ImageFormat f = udc::detect_format(path);
    if (f == udc::ImageFormat::Pfm)
        udc::write_image(img, path, f);
    else
        udc::write_image(udc::clip_quantize(img), path, f);
}

struct SynthOpts {
    udc::SynthesisConfig cfg;
    std::string out_format = "png";
};

struct DegradeOpts {
    std::string input, kernel, output, emit_linear;
    double alpha = 0.0, m = 0.0, sigma = 0.0, tc_c = 0.25;
    bool m_auto = false;
    uint64_t seed = 0;
};

struct RestoreOpts {
    std::string input, kernel, output;
    double alpha = 0.0, m = 0.0, eps = 1e-3, tc_c = 0.25;
};

struct EstimateOpts {
    std::string degraded_lin, clean, kernel;
};

struct MetricsOpts {
    std::string ref, test, hsv_hist;
};

struct PsfGenOpts {
    std::string mask, output;
    int size = 0;
    int oversample = 4;
};

struct PsfInfoOpts {
    std::string kernel;
};

struct SelftestOpts {
    uint64_t seed = 0;
    int size = 32;
    std::string config = "light";
    int gcabs = 0;  // 0 = config default
};

void run_synth(SynthOpts& o) {
    o.cfg.out_format = o.out_format == "pfm" ? udc::ImageFormat::Pfm : udc::ImageFormat::Png;
    auto records = udc::synthesize_dataset(o.cfg);
    std::cerr << "synthesized " << records.size() << " records under " << o.cfg.output_dir << "\n";
    std::cout << "records=" << records.size() << " manifest="
              << (fs::path(o.cfg.output_dir) / "manifest.jsonl").string() << "\n";
}

void run_degrade(const DegradeOpts& o) {
    udc::HdrImage clean = udc::read_hdr(o.input);
    udc::PsfKernel k = udc::load_kernel(o.kernel);
    const double m = o.m_auto ? udc::compute_m(clean) : o.m;
    udc::ScatteringParams p = udc::ScatteringParams::from_alpha(o.alpha, m);
    udc::ToneCurve curve{udc::ToneCurveKind::ReinhardOffset, o.tc_c};
    udc::DegradeResult res = udc::degrade(clean, p, k, {o.sigma, o.seed}, curve);
    write_degraded(res.image, o.output);
    if (!o.emit_linear.empty()) udc::write_pfm(res.linear, o.emit_linear);
    std::cerr << "degraded " << o.input << " -> " << o.output << " (alpha=" << fmt(o.alpha)
              << " m=" << fmt(m) << ")\n";
    std::cout << "alpha=" << fmt(o.alpha) << " m=" << fmt(m) << "\n";
}

void run_restore(const RestoreOpts& o) {
    udc::LdrImage degraded = udc::read_ldr_any(o.input);
    udc::PsfKernel k = udc::load_kernel(o.kernel);
    udc::ScatteringParams p = udc::ScatteringParams::from_alpha(o.alpha, o.m);
    udc::ToneCurve curve{udc::ToneCurveKind::ReinhardOffset, o.tc_c};
    udc::HdrImage restored = udc::restore_classical(degraded, p, k, curve, o.eps);
    udc::write_pfm(restored, o.output);
    std::cerr << "restored " << o.input << " -> " << o.output << "\n";
}

void run_estimate(const EstimateOpts& o) {
    udc::HdrImage degraded = udc::read_pfm(o.degraded_lin);
    udc::HdrImage clean = udc::read_pfm(o.clean);
    udc::PsfKernel k = udc::load_kernel(o.kernel);
    udc::ParamEstimate est = udc::estimate_params(degraded, clean, k);
    const double m_out = est.m_valid ? est.m : std::nan("");
    std::cout << "alpha=" << fmt(est.alpha) << " m=" << fmt(m_out)
              << " residual=" << fmt(est.residual_rms) << "\n";
}

std::vector<std::pair<std::string, std::pair<std::string, std::string>>> pair_up(
    const std::string& ref, const std::string& test) {
    std::vector<std::pair<std::string, std::pair<std::string, std::string>>> pairs;
    if (fs::is_directory(ref) != fs::is_directory(test))
        throw std::runtime_error("--ref and --test must both be files or both directories");
    if (!fs::is_directory(ref)) {
        pairs.push_back({fs::path(test).stem().string(), {ref, test}});
        return pairs;
    }
    std::map<std::string, std::string> ref_names;
    for (const auto& e : fs::directory_iterator(ref))
        if (e.is_regular_file()) ref_names[e.path().filename().string()] = e.path().string();
    std::vector<std::pair<std::string, std::string>> matched;
    for (const auto& e : fs::directory_iterator(test)) {
        if (!e.is_regular_file()) continue;
        auto it = ref_names.find(e.path().filename().string());
        if (it != ref_names.end()) matched.push_back({e.path().filename().string(), e.path().string()});
    }
    std::sort(matched.begin(), matched.end());
    for (const auto& [name, tpath] : matched)
        pairs.push_back({fs::path(name).stem().string(), {ref_names[name], tpath}});
    if (pairs.empty()) throw std::runtime_error("no matching file names between --ref and --test");
    return pairs;
}

void run_metrics(const MetricsOpts& o) {
    auto pairs = pair_up(o.ref, o.test);
    double psnr_sum = 0.0, ssim_sum = 0.0;
    udc::HsvHistogram ref_hist = udc::make_histogram();
    udc::HsvHistogram test_hist = udc::make_histogram();
    const bool want_hist = !o.hsv_hist.empty();
    for (const auto& [id, paths] : pairs) {
        udc::LdrImage ref_img = udc::read_ldr_any(paths.first);
        udc::LdrImage test_img = udc::read_ldr_any(paths.second);
        const double p = udc::psnr(ref_img, test_img);
        const double s = udc::ssim(ref_img, test_img);
        psnr_sum += p;
        ssim_sum += s;
        if (want_hist) {
            udc::accumulate_hsv(ref_hist, ref_img);
            udc::accumulate_hsv(test_hist, test_img);
        }
        std::cout << id << " " << fmt(p) << " " << fmt(s) << "\n";
    }
    const double n = static_cast<double>(pairs.size());
    std::cout << "mean " << fmt(psnr_sum / n) << " " << fmt(ssim_sum / n) << "\n";
    if (want_hist) {
        std::ofstream csv(o.hsv_hist, std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write " + o.hsv_hist);
        csv << "bin,h,s,v\n";
        for (int b = 0; b < test_hist.bin_count(); ++b) {
            csv << b << "," << fmt(static_cast<double>(test_hist.bins_h[b]) / test_hist.total) << ","
                << fmt(static_cast<double>(test_hist.bins_s[b]) / test_hist.total) << ","
                << fmt(static_cast<double>(test_hist.bins_v[b]) / test_hist.total) << "\n";
        }
        auto d = udc::hist_distance(ref_hist, test_hist);
        std::cout << "hist_l1 " << fmt(d[0]) << " " << fmt(d[1]) << " " << fmt(d[2]) << "\n";
        std::cerr << "wrote test-set HSV histogram to " << o.hsv_hist << "\n";
    }
}

void run_psf_gen(const PsfGenOpts& o) {
    udc::Plane mask;
    if (udc::detect_format(o.mask) == udc::ImageFormat::Pfm) {
        mask = udc::read_pfm_gray(o.mask);
    } else {
        mask = udc::to_grayscale(udc::read_ldr_any(o.mask));
    }
    udc::PsfKernel k = udc::gen_diffraction_psf(mask, o.size, o.size, o.oversample);
    k.id = fs::path(o.output).stem().string();
    std::string ext = fs::path(o.output).extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".pfm") {
        udc::Plane taps(k.height, k.width);
        taps.data = k.taps;
        udc::write_pfm_gray(taps, o.output);
    } else {
        udc::save_kernel_text(k, o.output);
    }
    std::cerr << "wrote " << k.height << "x" << k.width << " kernel to " << o.output << "\n";
}

void run_psf_info(const PsfInfoOpts& o) {
    udc::PsfKernel k = udc::load_kernel(o.kernel);
    double max_tap = 0.0, cy = 0.0, cx = 0.0;
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            max_tap = std::max(max_tap, k.at(y, x));
            cy += k.at(y, x) * y;
            cx += k.at(y, x) * x;
        }
    }
    std::cout << "id=" << k.id << " size=" << k.height << "x" << k.width
              << " sum=" << fmt(k.sum()) << " max=" << fmt(max_tap) << " centroid=" << fmt(cy)
              << "," << fmt(cx) << "\n";
}

int run_selftest_cmd(const SelftestOpts& o) {
    udc::NetConfig cfg = o.config == "full" ? udc::NetConfig::full() : udc::NetConfig::light();
    if (o.gcabs > 0) cfg.gcab_count = o.gcabs;
    const bool ok = udc::run_selftest(o.seed, o.size, cfg, std::cout);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scattering-aware under-display-camera degradation synthesis and restoration"};
    app.require_subcommand(1);

    SynthOpts synth;
    auto* cmd_synth = app.add_subcommand("synth", "Batch-synthesize a degraded dataset with a manifest");
    cmd_synth->add_option("--input-dir", synth.cfg.input_dir, "Directory of clean HDR inputs (.pfm)")->required();
    cmd_synth->add_option("--output-dir", synth.cfg.output_dir, "Output dataset directory")->required();
    cmd_synth->add_option("--kernels", synth.cfg.kernel_paths, "Blur kernel files")->required()->expected(-1);
    cmd_synth->add_option("--patch-size", synth.cfg.patch_size, "Square patch size")->capture_default_str();
    cmd_synth->add_option("--alpha-min", synth.cfg.alpha_min, "Transmittance lower bound")->capture_default_str();
    cmd_synth->add_option("--alpha-max", synth.cfg.alpha_max, "Transmittance upper bound")->capture_default_str();
    cmd_synth->add_option("--sigma", synth.cfg.sigma, "Gaussian noise level")->capture_default_str();
    cmd_synth->add_option("--pairs", synth.cfg.pairs_per_patch, "Degraded pairs per patch and kernel")->capture_default_str();
    cmd_synth->add_option("--seed", synth.cfg.master_seed, "Master seed")->capture_default_str();
    cmd_synth->add_option("--tc-c", synth.cfg.curve.c, "Tone curve constant")->capture_default_str();
    cmd_synth->add_option("--out-format", synth.out_format, "Degraded file format")
        ->check(CLI::IsMember({"png", "pfm"}))->capture_default_str();
    cmd_synth->add_flag("--random-offsets", synth.cfg.random_offsets, "Randomly shift the patch grid per image");
    cmd_synth->add_option("--jobs", synth.cfg.jobs, "Worker threads")->capture_default_str();
    cmd_synth->callback([&synth] { run_synth(synth); });

    DegradeOpts deg;
    auto* cmd_deg = app.add_subcommand("degrade", "Degrade one image with known parameters");
    cmd_deg->add_option("--input", deg.input, "Clean input image")->required();
    cmd_deg->add_option("--kernel", deg.kernel, "Blur kernel file")->required();
    cmd_deg->add_option("--alpha", deg.alpha, "Transmittance in (0,1]")->required();
    auto* opt_m = cmd_deg->add_option("--m", deg.m, "Veiling level");
    auto* opt_mauto = cmd_deg->add_flag("--m-auto", deg.m_auto, "Derive m from the input's gray mean");
    opt_m->excludes(opt_mauto);
    opt_mauto->excludes(opt_m);
    cmd_deg->add_option("--sigma", deg.sigma, "Gaussian noise level")->capture_default_str();
    cmd_deg->add_option("--seed", deg.seed, "Noise seed")->capture_default_str();
    cmd_deg->add_option("--output", deg.output, "Degraded output image")->required();
    cmd_deg->add_option("--emit-linear", deg.emit_linear, "Also write the pre-tone-map PFM here");
    cmd_deg->add_option("--tc-c", deg.tc_c, "Tone curve constant")->capture_default_str();
    cmd_deg->callback([&deg, opt_m, opt_mauto] {
        if (opt_m->count() == 0 && opt_mauto->count() == 0)
            throw CLI::RequiredError("--m or --m-auto");
        run_degrade(deg);
    });

    RestoreOpts res;
    auto* cmd_res = app.add_subcommand("restore", "Invert a degradation with known parameters");
    cmd_res->add_option("--input", res.input, "Degraded input image")->required();
    cmd_res->add_option("--kernel", res.kernel, "Blur kernel file")->required();
    cmd_res->add_option("--alpha", res.alpha, "Transmittance used during degradation")->required();
    cmd_res->add_option("--m", res.m, "Veiling level used during degradation")->required();
    cmd_res->add_option("--eps", res.eps, "Deconvolution regularizer")->capture_default_str();
    cmd_res->add_option("--output", res.output, "Restored HDR output (PFM)")->required();
    cmd_res->add_option("--tc-c", res.tc_c, "Tone curve constant")->capture_default_str();
    cmd_res->callback([&res] { run_restore(res); });

    EstimateOpts est;
    auto* cmd_est = app.add_subcommand("estimate", "Recover (alpha, m) from a degraded/clean pair");
    cmd_est->add_option("--degraded-lin", est.degraded_lin, "Pre-tone-map degraded PFM")->required();
    cmd_est->add_option("--clean", est.clean, "Clean reference PFM")->required();
    cmd_est->add_option("--kernel", est.kernel, "Blur kernel file")->required();
    cmd_est->callback([&est] { run_estimate(est); });

    MetricsOpts met;
    auto* cmd_met = app.add_subcommand("metrics", "PSNR/SSIM and HSV statistics");
    cmd_met->add_option("--ref", met.ref, "Reference image or directory")->required();
    cmd_met->add_option("--test", met.test, "Test image or directory")->required();
    cmd_met->add_option("--hsv-hist", met.hsv_hist, "Write the test-set HSV histogram CSV here");
    cmd_met->callback([&met] { run_metrics(met); });

    auto* cmd_psf = app.add_subcommand("psf", "Kernel utilities");
    cmd_psf->require_subcommand(1);
    PsfGenOpts pg;
    auto* cmd_gen = cmd_psf->add_subcommand("gen", "Diffraction kernel from an aperture mask");
    cmd_gen->add_option("--mask", pg.mask, "Aperture mask image")->required();
    cmd_gen->add_option("--size", pg.size, "Odd kernel side length")->required();
    cmd_gen->add_option("--oversample", pg.oversample, "FFT grid oversampling factor")->capture_default_str();
    cmd_gen->add_option("--output", pg.output, "Kernel output (.txt grid or .pfm)")->required();
    cmd_gen->callback([&pg] { run_psf_gen(pg); });
    PsfInfoOpts pi;
    auto* cmd_info = cmd_psf->add_subcommand("info", "Print kernel statistics");
    cmd_info->add_option("--kernel", pi.kernel, "Kernel file")->required();
    cmd_info->callback([&pi] { run_psf_info(pi); });

    SelftestOpts st;
    int selftest_rc = 0;
    auto* cmd_st = app.add_subcommand("net-selftest", "Run the network-block invariant suite");
    cmd_st->add_option("--seed", st.seed, "Weight/input seed")->capture_default_str();
    cmd_st->add_option("--size", st.size, "Input side length (divisible by 4)")->capture_default_str();
    cmd_st->add_option("--config", st.config, "Architecture preset")
        ->check(CLI::IsMember({"full", "light"}))->capture_default_str();
    cmd_st->add_option("--gcabs", st.gcabs, "Override the gated-block budget")->capture_default_str();
    cmd_st->callback([&st, &selftest_rc] { selftest_rc = run_selftest_cmd(st); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return selftest_rc;
}
