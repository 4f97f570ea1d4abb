#pragma once

#include "udc/image.hpp"
#include "udc/psf.hpp"

namespace udc {

/// Per-channel circular convolution with the kernel centered at its middle
/// tap, computed by frequency-domain multiplication. Requires the kernel to
/// fit inside the image.
HdrImage convolve_fft(const HdrImage& img, const PsfKernel& k);

/// Same contract as convolve_fft, evaluated as a direct spatial sum with
/// wrap-around indexing. O(H*W*kh*kw); serves as the independent oracle.
HdrImage convolve_direct(const HdrImage& img, const PsfKernel& k);

/// Regularized frequency-domain inverse of convolve_fft: per channel,
/// conj(K)*Y / (|K|^2 + eps). eps > 0 trades ringing against noise blowup.
HdrImage deconvolve_wiener(const HdrImage& img, const PsfKernel& k, double eps);

}  // namespace udc
