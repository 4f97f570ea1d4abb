#pragma once

#include <cstddef>
#include <string>

#include "udc/image.hpp"

namespace udc {

/// Raised on malformed or truncated image files; carries the byte offset at
/// which parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, size_t byte_offset)
        : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}
    size_t byte_offset() const { return byte_offset_; }

private:
    size_t byte_offset_;
};

enum class ImageFormat { Pfm, Ppm, Png, Auto };

ImageFormat detect_format(const std::string& path);

// PFM: 32-bit float RGB ("PF") or single channel ("Pf"). The scale line
// carries the endianness (negative = little endian); rows are stored
// bottom-up. Doubles hold float32 payloads exactly, so write-then-read is
// bitwise identity.
HdrImage read_pfm(const std::string& path);
void write_pfm(const HdrImage& img, const std::string& path);
Plane read_pfm_gray(const std::string& path);
void write_pfm_gray(const Plane& p, const std::string& path);

// PPM P6, maxval 255, binary payload.
LdrImage read_ppm(const std::string& path);
void write_ppm(const LdrImage& img, const std::string& path);

// PNG, 8-bit RGB. Reading converts palette/gray/alpha variants to RGB8.
LdrImage read_png(const std::string& path);
void write_png(const LdrImage& img, const std::string& path);

/// Reads an LDR image (PPM or PNG); 8-bit samples become k/255.
LdrImage read_ldr(const std::string& path, ImageFormat fmt = ImageFormat::Auto);
void write_ldr(const LdrImage& img, const std::string& path, ImageFormat fmt = ImageFormat::Auto);

/// Reads any supported format as linear HDR data; LDR formats are promoted
/// without value changes (k/255 samples).
HdrImage read_hdr(const std::string& path, ImageFormat fmt = ImageFormat::Auto);

/// Reads LDR content from any supported format. PFM input must already lie
/// in [0,1].
LdrImage read_ldr_any(const std::string& path, ImageFormat fmt = ImageFormat::Auto);

/// Writes float LDR data as PFM, 8-bit data as PPM/PNG (quantizing first if
/// needed is the caller's job; see clip_quantize).
void write_image(const LdrImage& img, const std::string& path, ImageFormat fmt = ImageFormat::Auto);

}  // namespace udc
