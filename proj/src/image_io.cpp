#include "udc/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace udc {

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

// Cursor over an in-memory file; all header scanning goes through it so
// parse errors can report an exact byte offset.
struct Cursor {
    const std::vector<char>& bytes;
    size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    char peek() const { return bytes[pos]; }

    void skip_space_and_comments() {
        while (!eof()) {
            char c = bytes[pos];
            if (c == '#') {
                while (!eof() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::string token() {
        skip_space_and_comments();
        size_t start = pos;
        while (!eof() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos == start) throw ParseError("unexpected end of header", pos);
        return std::string(bytes.data() + start, pos - start);
    }

    long integer(const char* what) {
        size_t at = pos;
        std::string t = token();
        char* end = nullptr;
        long v = std::strtol(t.c_str(), &end, 10);
        if (end == t.c_str() || *end != '\0') {
            throw ParseError(std::string("expected integer for ") + what + ", got '" + t + "'", at);
        }
        return v;
    }

    double number(const char* what) {
        size_t at = pos;
        std::string t = token();
        char* end = nullptr;
        double v = std::strtod(t.c_str(), &end);
        if (end == t.c_str() || *end != '\0') {
            throw ParseError(std::string("expected number for ") + what + ", got '" + t + "'", at);
        }
        return v;
    }
};

float swap_float(float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    u = __builtin_bswap32(u);
    std::memcpy(&f, &u, 4);
    return f;
}

constexpr bool host_little_endian() { return std::endian::native == std::endian::little; }

// Reads the payload of a PFM file into row-major top-down planes.
// channels is 3 ("PF") or 1 ("Pf").
std::vector<float> read_pfm_payload(const std::vector<char>& bytes, int& w, int& h,
                                    int& channels) {
    Cursor cur{bytes};
    std::string magic = cur.token();
    if (magic == "PF") {
        channels = 3;
    } else if (magic == "Pf") {
        channels = 1;
    } else {
        throw ParseError("not a PFM file (magic '" + magic + "')", 0);
    }
    long lw = cur.integer("width");
    long lh = cur.integer("height");
    if (lw < 1 || lh < 1) throw ParseError("non-positive PFM dimensions", cur.pos);
    double scale = cur.number("scale");
    if (scale == 0.0) throw ParseError("PFM scale must be nonzero", cur.pos);
    bool file_little = scale < 0.0;
    // Exactly one whitespace byte separates the header from the payload.
    if (cur.eof() || !std::isspace(static_cast<unsigned char>(cur.peek()))) {
        throw ParseError("missing separator before PFM payload", cur.pos);
    }
    ++cur.pos;

    w = static_cast<int>(lw);
    h = static_cast<int>(lh);
    size_t count = static_cast<size_t>(w) * h * channels;
    size_t need = count * 4;
    if (bytes.size() - cur.pos < need) {
        throw ParseError("truncated PFM payload: need " + std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size() - cur.pos),
                         bytes.size());
    }
    std::vector<float> vals(count);
    std::memcpy(vals.data(), bytes.data() + cur.pos, need);
    if (file_little != host_little_endian()) {
        for (float& f : vals) f = swap_float(f);
    }
    // PFM rows are stored bottom-up; flip to top-down.
    std::vector<float> out(count);
    size_t row_elems = static_cast<size_t>(w) * channels;
    for (int y = 0; y < h; ++y) {
        std::memcpy(out.data() + static_cast<size_t>(y) * row_elems,
                    vals.data() + static_cast<size_t>(h - 1 - y) * row_elems, row_elems * 4);
    }
    return out;
}

void write_pfm_payload(const std::string& path, const float* topdown, int w, int h, int channels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << (channels == 3 ? "PF" : "Pf") << "\n" << w << " " << h << "\n";
    out << (host_little_endian() ? "-1.0" : "1.0") << "\n";
    size_t row_elems = static_cast<size_t>(w) * channels;
    for (int y = h - 1; y >= 0; --y) {
        out.write(reinterpret_cast<const char*>(topdown + static_cast<size_t>(y) * row_elems),
                  static_cast<std::streamsize>(row_elems * 4));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

ImageFormat detect_format(const std::string& path) {
    std::string ext = lower_ext(path);
    if (ext == "pfm") return ImageFormat::Pfm;
    if (ext == "ppm") return ImageFormat::Ppm;
    if (ext == "png") return ImageFormat::Png;
    // Fall back to magic bytes.
    std::ifstream in(path, std::ios::binary);
    char m[8] = {};
    if (in.read(m, 8)) {
        if ((m[0] == 'P' && (m[1] == 'F' || m[1] == 'f'))) return ImageFormat::Pfm;
        if (m[0] == 'P' && m[1] == '6') return ImageFormat::Ppm;
        static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
        if (std::memcmp(m, png_sig, 8) == 0) return ImageFormat::Png;
    }
    throw std::runtime_error("cannot determine image format of " + path);
}

HdrImage read_pfm(const std::string& path) {
    auto bytes = slurp(path);
    int w, h, ch;
    auto vals = read_pfm_payload(bytes, w, h, ch);
    HdrImage img(h, w);
    double* dst = img.data();
    if (ch == 3) {
        for (size_t i = 0; i < vals.size(); ++i) dst[i] = vals[i];
    } else {
        for (size_t i = 0; i < vals.size(); ++i) {
            dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = vals[i];
        }
    }
    return img;
}

void write_pfm(const HdrImage& img, const std::string& path) {
    std::vector<float> vals(img.sample_count());
    const double* src = img.data();
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(src[i]);
    write_pfm_payload(path, vals.data(), img.width(), img.height(), 3);
}

Plane read_pfm_gray(const std::string& path) {
    auto bytes = slurp(path);
    int w, h, ch;
    auto vals = read_pfm_payload(bytes, w, h, ch);
    Plane p(h, w);
    if (ch == 1) {
        for (size_t i = 0; i < vals.size(); ++i) p.data[i] = vals[i];
    } else {
        for (size_t i = 0; i < p.size(); ++i) {
            p.data[i] = (static_cast<double>(vals[3 * i]) + vals[3 * i + 1] + vals[3 * i + 2]) / 3.0;
        }
    }
    return p;
}

void write_pfm_gray(const Plane& p, const std::string& path) {
    std::vector<float> vals(p.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(p.data[i]);
    write_pfm_payload(path, vals.data(), p.width, p.height, 1);
}

LdrImage read_ppm(const std::string& path) {
    auto bytes = slurp(path);
    Cursor cur{bytes};
    std::string magic = cur.token();
    if (magic != "P6") throw ParseError("not a binary PPM (magic '" + magic + "')", 0);
    long w = cur.integer("width");
    long h = cur.integer("height");
    long maxval = cur.integer("maxval");
    if (w < 1 || h < 1) throw ParseError("non-positive PPM dimensions", cur.pos);
    if (maxval != 255) throw ParseError("unsupported PPM maxval " + std::to_string(maxval), cur.pos);
    if (cur.eof() || !std::isspace(static_cast<unsigned char>(cur.peek()))) {
        throw ParseError("missing separator before PPM payload", cur.pos);
    }
    ++cur.pos;
    size_t need = static_cast<size_t>(w) * h * 3;
    if (bytes.size() - cur.pos < need) {
        throw ParseError("truncated PPM payload: need " + std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size() - cur.pos),
                         bytes.size());
    }
    LdrImage img(static_cast<int>(h), static_cast<int>(w), 0.0, BitDepth::Eight);
    double* dst = img.data();
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data() + cur.pos);
    for (size_t i = 0; i < need; ++i) dst[i] = src[i] / 255.0;
    return img;
}

namespace {

std::vector<unsigned char> quantize_bytes(const LdrImage& img) {
    std::vector<unsigned char> bytes(img.sample_count());
    const double* src = img.data();
    for (size_t i = 0; i < bytes.size(); ++i) {
        double v = std::clamp(src[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::round(v * 255.0));
    }
    return bytes;
}

}  // namespace

void write_ppm(const LdrImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    auto bytes = quantize_bytes(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    throw std::runtime_error(std::string("libpng: ") + msg);
    (void)png;
}

void png_warn_fn(png_structp, png_const_charp) {}

}  // namespace

LdrImage read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open file: " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    try {
        png_init_io(png, fp.get());
        png_read_info(png, info);

        png_set_palette_to_rgb(png);
        png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        png_set_strip_alpha(png);
        png_set_gray_to_rgb(png);
        png_read_update_info(png, info);

        int w = static_cast<int>(png_get_image_width(png, info));
        int h = static_cast<int>(png_get_image_height(png, info));
        if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8) {
            throw std::runtime_error("PNG did not decode to 8-bit RGB: " + path);
        }
        std::vector<unsigned char> rows(static_cast<size_t>(w) * h * 3);
        std::vector<png_bytep> row_ptrs(h);
        for (int y = 0; y < h; ++y) row_ptrs[y] = rows.data() + static_cast<size_t>(y) * w * 3;
        png_read_image(png, row_ptrs.data());
        png_read_end(png, nullptr);
        png_destroy_read_struct(&png, &info, nullptr);

        LdrImage img(h, w, 0.0, BitDepth::Eight);
        double* dst = img.data();
        for (size_t i = 0; i < rows.size(); ++i) dst[i] = rows[i] / 255.0;
        return img;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

void write_png(const LdrImage& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open file for writing: " + path);

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    try {
        png_init_io(png, fp.get());
        // Fixed settings keep the byte stream reproducible run to run.
        png_set_compression_level(png, 6);
        png_set_filter(png, 0, PNG_ALL_FILTERS);
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                     static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        auto bytes = quantize_bytes(img);
        std::vector<png_bytep> row_ptrs(img.height());
        for (int y = 0; y < img.height(); ++y) {
            row_ptrs[y] = bytes.data() + static_cast<size_t>(y) * img.width() * 3;
        }
        png_write_image(png, row_ptrs.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

namespace {

ImageFormat resolve(const std::string& path, ImageFormat fmt) {
    return fmt == ImageFormat::Auto ? detect_format(path) : fmt;
}

}  // namespace

LdrImage read_ldr(const std::string& path, ImageFormat fmt) {
    switch (resolve(path, fmt)) {
        case ImageFormat::Ppm: return read_ppm(path);
        case ImageFormat::Png: return read_png(path);
        default: throw std::runtime_error("not an LDR format: " + path);
    }
}

void write_ldr(const LdrImage& img, const std::string& path, ImageFormat fmt) {
    switch (resolve(path, fmt)) {
        case ImageFormat::Ppm: write_ppm(img, path); return;
        case ImageFormat::Png: write_png(img, path); return;
        default: throw std::runtime_error("not an LDR output format: " + path);
    }
}

HdrImage read_hdr(const std::string& path, ImageFormat fmt) {
    ImageFormat f = resolve(path, fmt);
    if (f == ImageFormat::Pfm) return read_pfm(path);
    LdrImage ldr = read_ldr(path, f);
    HdrImage out(ldr.height(), ldr.width());
    std::copy(ldr.data(), ldr.data() + ldr.sample_count(), out.data());
    return out;
}

LdrImage read_ldr_any(const std::string& path, ImageFormat fmt) {
    ImageFormat f = resolve(path, fmt);
    if (f != ImageFormat::Pfm) return read_ldr(path, f);
    HdrImage hdr = read_pfm(path);
    LdrImage out(hdr.height(), hdr.width());
    const double* src = hdr.data();
    double* dst = out.data();
    for (size_t i = 0; i < hdr.sample_count(); ++i) {
        if (!(src[i] >= 0.0 && src[i] <= 1.0)) {
            throw std::runtime_error("PFM value outside [0,1], not LDR data: " + path);
        }
        dst[i] = src[i];
    }
    return out;
}

void write_image(const LdrImage& img, const std::string& path, ImageFormat fmt) {
    ImageFormat f = resolve(path, fmt);
    if (f == ImageFormat::Pfm) {
        HdrImage tmp(img.height(), img.width());
        std::copy(img.data(), img.data() + img.sample_count(), tmp.data());
        write_pfm(tmp, path);
        return;
    }
    write_ldr(img, path, f);
}

}  // namespace udc
