#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udc/convolve.hpp"
#include "udc/image_io.hpp"
#include "udc/noise.hpp"
#include "udc/scatter.hpp"
#include "udc/tonemap.hpp"

namespace udc {

struct DegradeResult {
    LdrImage image;   // tone-mapped output
    HdrImage linear;  // pre-tone-map intermediate (scatter + blur + noise)
};

/// Full forward synthesis: scatter -> circular PSF convolution -> additive
/// Gaussian noise -> tone curve. Deterministic given the noise seed.
DegradeResult degrade(const HdrImage& B, const ScatteringParams& p, const PsfKernel& k,
                      const NoiseSpec& noise, const ToneCurve& curve);

/// Plain convolution model: gamma * (B conv k) + noise, tone-mapped. Kept as
/// the baseline the scattering model is compared against.
DegradeResult legacy_degrade(const HdrImage& B, double gamma, const PsfKernel& k,
                             const NoiseSpec& noise, const ToneCurve& curve);

/// Exact-model restoration: inverse tone curve, Wiener deconvolution with
/// regularizer eps, inverse scattering. Output clamped at zero. eps must be
/// positive.
HdrImage restore_classical(const LdrImage& I, const ScatteringParams& p, const PsfKernel& k,
                           const ToneCurve& curve, double eps = 1e-3);

struct PatchRect {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
};

/// One line of the synthesis manifest. Paths are relative to the manifest's
/// directory so datasets stay relocatable. `seed` is the noise seed actually
/// used, making every record reproducible on its own.
struct DegradationRecord {
    std::string id;
    std::string clean_path;
    std::string degraded_path;
    double alpha = 0.0;
    double m = 0.0;
    std::string kernel_id;
    double sigma = 0.0;
    uint64_t seed = 0;
    PatchRect patch;
    std::string tc_kind = "reinhard-offset";
    double tc_c = 0.25;
};

std::string serialize_record(const DegradationRecord& r);
DegradationRecord parse_record(const std::string& line);
std::vector<DegradationRecord> read_manifest(const std::string& path);

struct SynthesisConfig {
    std::string input_dir;
    std::string output_dir;
    std::vector<std::string> kernel_paths;
    int pairs_per_patch = 1;
    int patch_size = 800;
    double alpha_min = 0.6;
    double alpha_max = 0.9;
    double sigma = 0.0;
    uint64_t master_seed = 0;
    ToneCurve curve;
    ImageFormat out_format = ImageFormat::Png;  // degraded files; clean is always PFM
    bool random_offsets = false;                // per-image random grid shift
    int jobs = 1;

    void validate() const;
};

/// Per-record seed derived from the master seed and the record's position,
/// so records are independently reproducible and order-independent.
uint64_t record_seed(uint64_t master_seed, uint64_t patch_idx, uint64_t kernel_idx,
                     uint64_t repeat_idx);

/// Crops every full patch from every readable PFM under input_dir (sorted by
/// filename), degrades each patch with every kernel pairs_per_patch times,
/// and writes clean PFMs, degraded images, and manifest.jsonl under
/// output_dir. Unreadable inputs are skipped with a warning on stderr;
/// no inputs or no full patches is an error. Returns the records in
/// manifest order.
std::vector<DegradationRecord> synthesize_dataset(const SynthesisConfig& cfg);

/// Re-runs the degradation described by a record. base_dir is the manifest's
/// directory (record paths are relative to it). The result is bit-identical
/// to the original synthesis.
DegradeResult degrade_from_record(const DegradationRecord& rec, const PsfKernel& k,
                                  const std::string& base_dir);

}  // namespace udc
