#pragma once

#include <string>
#include <vector>

#include "udc/image.hpp"

namespace udc {

/// Nonnegative 2-D blur kernel with odd sides, normalized to unit sum.
struct PsfKernel {
    int height = 0;
    int width = 0;
    std::vector<double> taps;  // row-major
    std::string id;

    double at(int y, int x) const { return taps[static_cast<size_t>(y) * width + x]; }
    double& at(int y, int x) { return taps[static_cast<size_t>(y) * width + x]; }
    double sum() const;
};

/// Builds a kernel from raw taps: clamps negatives to zero, then normalizes
/// to unit sum. Throws on even dimensions or a nonpositive tap sum.
PsfKernel make_kernel(int height, int width, std::vector<double> taps, std::string id = "");

/// 1x1 identity kernel.
PsfKernel delta_kernel();

/// Sampled isotropic Gaussian, odd size, normalized.
PsfKernel gaussian_kernel(int size, double sigma, std::string id = "gaussian");

/// Loads a kernel from a text grid ("kh kw" then kh rows of kw floats) or a
/// single-channel PFM, deciding by content. Taps are clamped and normalized.
PsfKernel load_kernel(const std::string& path);

/// Writes the text grid format.
void save_kernel_text(const PsfKernel& k, const std::string& path);

/// Fraunhofer-style kernel from a binary aperture mask: the mask is zero-
/// padded onto an oversampled FFT grid, and the centered power spectrum
/// |FFT(mask)|^2 is cropped to out_h x out_w and normalized. Monochromatic;
/// deterministic. Throws if the crop exceeds the FFT grid, if the mask has
/// no open pixel, or if the output sides are even.
PsfKernel gen_diffraction_psf(const Plane& aperture_mask, int out_h, int out_w,
                              int oversample = 4);

}  // namespace udc
