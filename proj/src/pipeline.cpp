#include "udc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace udc {

namespace fs = std::filesystem;

DegradeResult degrade(const HdrImage& B, const ScatteringParams& p, const PsfKernel& k,
                      const NoiseSpec& noise, const ToneCurve& curve) {
    p.validate();
    HdrImage lin = add_noise(convolve_fft(scatter_forward(B, p), k), noise);
    DegradeResult r;
    r.image = tonemap_forward(lin, curve);
    r.linear = std::move(lin);
    return r;
}

DegradeResult legacy_degrade(const HdrImage& B, double gamma, const PsfKernel& k,
                             const NoiseSpec& noise, const ToneCurve& curve) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    HdrImage scaled = convolve_fft(B, k);
    for (size_t i = 0; i < scaled.sample_count(); ++i) scaled.data()[i] *= gamma;
    HdrImage lin = add_noise(scaled, noise);
    DegradeResult r;
    r.image = tonemap_forward(lin, curve);
    r.linear = std::move(lin);
    return r;
}

HdrImage restore_classical(const LdrImage& I, const ScatteringParams& p, const PsfKernel& k,
                           const ToneCurve& curve, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("wiener eps must be > 0");
    p.validate();
    return scatter_inverse(deconvolve_wiener(tonemap_inverse(I, curve), k, eps), p);
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string serialize_record(const DegradationRecord& r) {
    std::string s = "{";
    s += "\"id\":\"" + json_escape(r.id) + "\"";
    s += ",\"clean_path\":\"" + json_escape(r.clean_path) + "\"";
    s += ",\"degraded_path\":\"" + json_escape(r.degraded_path) + "\"";
    s += ",\"alpha\":" + fmt_double(r.alpha);
    s += ",\"m\":" + fmt_double(r.m);
    s += ",\"kernel_id\":\"" + json_escape(r.kernel_id) + "\"";
    s += ",\"sigma\":" + fmt_double(r.sigma);
    char seedbuf[32];
    std::snprintf(seedbuf, sizeof seedbuf, "%" PRIu64, r.seed);
    s += ",\"seed\":";
    s += seedbuf;
    s += ",\"patch\":{\"x0\":" + std::to_string(r.patch.x0) + ",\"y0\":" + std::to_string(r.patch.y0) +
         ",\"w\":" + std::to_string(r.patch.w) + ",\"h\":" + std::to_string(r.patch.h) + "}";
    s += ",\"tc_kind\":\"" + json_escape(r.tc_kind) + "\"";
    s += ",\"tc_c\":" + fmt_double(r.tc_c);
    s += "}";
    return s;
}

DegradationRecord parse_record(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    DegradationRecord r;
    r.id = j.at("id").get<std::string>();
    r.clean_path = j.at("clean_path").get<std::string>();
    r.degraded_path = j.at("degraded_path").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.m = j.at("m").get<double>();
    r.kernel_id = j.at("kernel_id").get<std::string>();
    r.sigma = j.at("sigma").get<double>();
    r.seed = j.at("seed").get<uint64_t>();
    const auto& p = j.at("patch");
    r.patch = {p.at("x0").get<int>(), p.at("y0").get<int>(), p.at("w").get<int>(), p.at("h").get<int>()};
    r.tc_kind = j.at("tc_kind").get<std::string>();
    r.tc_c = j.at("tc_c").get<double>();
    return r;
}

std::vector<DegradationRecord> read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<DegradationRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(parse_record(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void SynthesisConfig::validate() const {
    if (input_dir.empty() || output_dir.empty())
        throw std::invalid_argument("input and output directories are required");
    if (pairs_per_patch < 1) throw std::invalid_argument("pairs_per_patch must be >= 1");
    if (patch_size < 1) throw std::invalid_argument("patch_size must be >= 1");
    if (!(alpha_min > 0.0 && alpha_min <= alpha_max && alpha_max <= 1.0))
        throw std::invalid_argument("alpha range must satisfy 0 < min <= max <= 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if (kernel_paths.empty()) throw std::invalid_argument("at least one kernel is required");
    if (out_format != ImageFormat::Png && out_format != ImageFormat::Pfm)
        throw std::invalid_argument("degraded output format must be png or pfm");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    curve.validate();
}

uint64_t record_seed(uint64_t master_seed, uint64_t patch_idx, uint64_t kernel_idx,
                     uint64_t repeat_idx) {
    return mix_seed(mix_seed(mix_seed(master_seed, patch_idx), kernel_idx), repeat_idx);
}

namespace {

struct PatchEntry {
    std::string clean_rel;
    PatchRect rect;
    double m = 0.0;
};

std::string format_id(size_t patch_idx, size_t kernel_idx, size_t repeat_idx) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "p%05zu_k%02zu_r%02zu", patch_idx, kernel_idx, repeat_idx);
    return buf;
}

}  // namespace

std::vector<DegradationRecord> synthesize_dataset(const SynthesisConfig& cfg) {
    cfg.validate();

    std::vector<PsfKernel> kernels;
    kernels.reserve(cfg.kernel_paths.size());
    for (const auto& kp : cfg.kernel_paths) {
        PsfKernel k = load_kernel(kp);
        if (k.height > cfg.patch_size || k.width > cfg.patch_size)
            throw std::invalid_argument("kernel " + kp + " larger than patch size");
        kernels.push_back(std::move(k));
    }

    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(cfg.input_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pfm")
            inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty())
        throw std::runtime_error("no .pfm inputs found in " + cfg.input_dir);

    const fs::path out_root(cfg.output_dir);
    fs::create_directories(out_root / "clean");
    fs::create_directories(out_root / "degraded");

    const int ps = cfg.patch_size;
    std::vector<PatchEntry> patches;
    size_t image_idx = 0;
    for (const auto& ipath : inputs) {
        HdrImage img;
        try {
            img = read_hdr(ipath.string());
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping unreadable input " << ipath.string() << ": " << e.what()
                      << "\n";
            ++image_idx;
            continue;
        }
        const int ny = img.height() / ps;
        const int nx = img.width() / ps;
        int sy = 0, sx = 0;
        if (cfg.random_offsets && ny > 0 && nx > 0) {
            SplitMix64 r(mix_seed(mix_seed(cfg.master_seed, 0x0FF5E7), image_idx));
            sy = static_cast<int>(r.next() % static_cast<uint64_t>(img.height() - ny * ps + 1));
            sx = static_cast<int>(r.next() % static_cast<uint64_t>(img.width() - nx * ps + 1));
        }
        for (int gy = 0; gy < ny; ++gy) {
            for (int gx = 0; gx < nx; ++gx) {
                PatchEntry pe;
                pe.rect = {sx + gx * ps, sy + gy * ps, ps, ps};
                HdrImage patch = crop_patch(img, pe.rect.x0, pe.rect.y0, ps, ps);
                patch.validate();
                pe.m = compute_m(patch);
                char buf[32];
                std::snprintf(buf, sizeof buf, "clean/p%05zu.pfm", patches.size());
                pe.clean_rel = buf;
                write_pfm(patch, (out_root / pe.clean_rel).string());
                patches.push_back(std::move(pe));
            }
        }
        ++image_idx;
    }
    if (patches.empty())
        throw std::runtime_error("inputs yielded no full " + std::to_string(ps) + "x" +
                                 std::to_string(ps) + " patches");

    const size_t n_patches = patches.size();
    const size_t n_kernels = kernels.size();
    const size_t n_repeats = static_cast<size_t>(cfg.pairs_per_patch);
    const size_t total = n_patches * n_kernels * n_repeats;
    std::vector<DegradationRecord> records(total);

    std::atomic<size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const size_t flat = next.fetch_add(1);
            if (flat >= total) return;
            if (first_error) return;
            try {
                const size_t ri = flat % n_repeats;
                const size_t ki = (flat / n_repeats) % n_kernels;
                const size_t pi = flat / (n_repeats * n_kernels);
                const PatchEntry& pe = patches[pi];

                SplitMix64 rng(record_seed(cfg.master_seed, pi, ki, ri));
                const double alpha = sample_alpha(rng, cfg.alpha_min, cfg.alpha_max);
                const uint64_t noise_seed = rng.next();

                HdrImage clean = read_pfm((out_root / pe.clean_rel).string());
                ScatteringParams p = ScatteringParams::from_alpha(alpha, pe.m);
                DegradeResult res = degrade(clean, p, kernels[ki], {cfg.sigma, noise_seed}, cfg.curve);

                DegradationRecord rec;
                rec.id = format_id(pi, ki, ri);
                rec.clean_path = pe.clean_rel;
                rec.degraded_path =
                    "degraded/" + rec.id + (cfg.out_format == ImageFormat::Png ? ".png" : ".pfm");
                rec.alpha = alpha;
                rec.m = pe.m;
                rec.kernel_id = kernels[ki].id;
                rec.sigma = cfg.sigma;
                rec.seed = noise_seed;
                rec.patch = pe.rect;
                rec.tc_kind = tone_curve_kind_name(cfg.curve.kind);
                rec.tc_c = cfg.curve.c;

                const std::string out_path = (out_root / rec.degraded_path).string();
                if (cfg.out_format == ImageFormat::Png)
                    write_png(clip_quantize(res.image), out_path);
                else
                    write_image(res.image, out_path, ImageFormat::Pfm);
                records[flat] = std::move(rec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const size_t n_threads = std::min<size_t>(static_cast<size_t>(cfg.jobs), total);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::ofstream mf((out_root / "manifest.jsonl").string(), std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write manifest under " + cfg.output_dir);
    for (const auto& rec : records) mf << serialize_record(rec) << '\n';
    mf.close();
    if (!mf) throw std::runtime_error("manifest write failed under " + cfg.output_dir);
    return records;
}

DegradeResult degrade_from_record(const DegradationRecord& rec, const PsfKernel& k,
                                  const std::string& base_dir) {
    HdrImage clean = read_pfm((fs::path(base_dir) / rec.clean_path).string());
    ScatteringParams p = ScatteringParams::from_alpha(rec.alpha, rec.m);
    ToneCurve curve{tone_curve_kind_from_name(rec.tc_kind), rec.tc_c};
    return degrade(clean, p, k, {rec.sigma, rec.seed}, curve);
}

}  // namespace udc
