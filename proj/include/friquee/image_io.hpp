#pragma once

// Decoding of PNG, JPEG and BMP files into RGB planes, and lossless / lossy encoders used to
// write generated images. Values are reals in [0, 255]; 16-bit PNG samples are rescaled by
// v * 255 / 65535. Grayscale is replicated across channels and alpha is dropped.

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "friquee/color.hpp"
#include "friquee/error.hpp"

namespace friquee::io {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return f;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// ---- PNG ----------------------------------------------------------------------------------

inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

inline RgbImage decode_png(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    std::string message = "corrupt PNG";
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    if (!png) throw Error(ErrorKind::DecodeError, "libpng initialisation failed");
    png_infop info = png_create_info_struct(png);

    std::vector<unsigned char> buffer;
    std::vector<png_bytep> rows;
    RgbImage out;
    volatile bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
        failed = true;
    } else {
        png_init_io(png, file.get());
        png_read_info(png, info);
        png_set_expand(png);
        png_set_strip_alpha(png);
        png_set_gray_to_rgb(png);
        if (png_get_bit_depth(png, info) == 16) png_set_swap(png);  // host-order little-endian
        png_read_update_info(png, info);

        const png_uint_32 width = png_get_image_width(png, info);
        const png_uint_32 height = png_get_image_height(png, info);
        const int depth = png_get_bit_depth(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        buffer.resize(stride * height);
        rows.resize(height);
        for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer.data() + r * stride;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        out = RgbImage(height, width);
        for (png_uint_32 r = 0; r < height; ++r) {
            for (png_uint_32 c = 0; c < width; ++c) {
                std::array<double, 3> px{};
                for (int k = 0; k < 3; ++k) {
                    if (depth == 16) {
                        std::uint16_t v = 0;
                        std::memcpy(&v, rows[r] + (c * 3 + k) * 2, 2);
                        px[k] = v * 255.0 / 65535.0;
                    } else {
                        px[k] = rows[r][c * 3 + k];
                    }
                }
                out.r(r, c) = px[0];
                out.g(r, c) = px[1];
                out.b(r, c) = px[2];
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (failed) throw Error(ErrorKind::DecodeError, path.string() + ": " + message);
    return out;
}

// ---- JPEG ---------------------------------------------------------------------------------

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Warnings (premature end of data, corrupt segments) are treated as hard failures.
inline void jpeg_emit_message(j_common_ptr cinfo, int level) {
    if (level < 0) jpeg_error_exit(cinfo);
}

inline RgbImage decode_jpeg(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    err.pub.emit_message = jpeg_emit_message;
    std::snprintf(err.message, sizeof err.message, "corrupt JPEG");

    std::vector<unsigned char> row;
    RgbImage out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorKind::DecodeError, path.string() + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out = RgbImage(cinfo.output_height, cinfo.output_width);
    row.resize(static_cast<std::size_t>(cinfo.output_width) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        const std::size_t r = cinfo.output_scanline;
        JSAMPROW ptr = row.data();
        jpeg_read_scanlines(&cinfo, &ptr, 1);
        for (std::size_t c = 0; c < cinfo.output_width; ++c) {
            out.r(r, c) = row[c * 3];
            out.g(r, c) = row[c * 3 + 1];
            out.b(r, c) = row[c * 3 + 2];
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

// ---- BMP ----------------------------------------------------------------------------------

inline std::uint32_t le32(const std::vector<unsigned char>& b, std::size_t at) {
    if (at + 4 > b.size()) throw Error(ErrorKind::DecodeError, "truncated BMP header");
    return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline std::uint16_t le16(const std::vector<unsigned char>& b, std::size_t at) {
    if (at + 2 > b.size()) throw Error(ErrorKind::DecodeError, "truncated BMP header");
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

/// Uncompressed BMP: 24/32-bit direct colour or 8-bit palettized, bottom-up or top-down.
inline RgbImage decode_bmp(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M')
        throw Error(ErrorKind::DecodeError, path.string() + ": not a BMP file");
    const std::uint32_t data_offset = le32(bytes, 10);
    const std::uint32_t header_size = le32(bytes, 14);
    const auto width = static_cast<std::int32_t>(le32(bytes, 18));
    const auto raw_height = static_cast<std::int32_t>(le32(bytes, 22));
    const std::uint16_t bpp = le16(bytes, 28);
    const std::uint32_t compression = le32(bytes, 30);
    const bool bitfields32 = compression == 3 && bpp == 32;
    if (compression != 0 && !bitfields32)
        throw Error(ErrorKind::DecodeError, path.string() + ": compressed BMP is not supported");
    if (bpp != 24 && bpp != 32 && bpp != 8)
        throw Error(ErrorKind::DecodeError, path.string() + ": unsupported BMP depth " + std::to_string(bpp));
    if (width <= 0 || raw_height == 0) throw Error(ErrorKind::DecodeError, path.string() + ": bad BMP dimensions");
    const bool top_down = raw_height < 0;
    const auto height = static_cast<std::size_t>(top_down ? -static_cast<long>(raw_height) : raw_height);
    const auto w = static_cast<std::size_t>(width);

    std::vector<std::array<unsigned char, 3>> palette;
    if (bpp == 8) {
        std::uint32_t colors = le32(bytes, 46);
        if (colors == 0) colors = 256;
        const std::size_t at = 14 + header_size;
        if (at + colors * 4 > bytes.size()) throw Error(ErrorKind::DecodeError, path.string() + ": truncated palette");
        for (std::uint32_t i = 0; i < colors; ++i)
            palette.push_back({bytes[at + i * 4 + 2], bytes[at + i * 4 + 1], bytes[at + i * 4]});
    }

    const std::size_t stride = ((w * bpp + 31) / 32) * 4;
    if (data_offset + stride * height > bytes.size())
        throw Error(ErrorKind::DecodeError, path.string() + ": truncated pixel data");
    RgbImage out(height, w);
    for (std::size_t r = 0; r < height; ++r) {
        const std::size_t src_row = top_down ? r : height - 1 - r;
        const unsigned char* row = bytes.data() + data_offset + src_row * stride;
        for (std::size_t c = 0; c < w; ++c) {
            if (bpp == 8) {
                if (row[c] >= palette.size()) throw Error(ErrorKind::DecodeError, path.string() + ": palette index");
                const auto& p = palette[row[c]];
                out.r(r, c) = p[0];
                out.g(r, c) = p[1];
                out.b(r, c) = p[2];
            } else {
                const unsigned char* px = row + c * (bpp / 8);
                out.b(r, c) = px[0];
                out.g(r, c) = px[1];
                out.r(r, c) = px[2];
            }
        }
    }
    return out;
}

}  // namespace detail

inline RgbImage decode_image(const std::filesystem::path& path) {
    std::array<unsigned char, 8> magic{};
    {
        detail::FilePtr f = detail::open_file(path, "rb");
        if (std::fread(magic.data(), 1, magic.size(), f.get()) < 2)
            throw Error(ErrorKind::DecodeError, path.string() + ": file too short");
    }
    static constexpr std::array<unsigned char, 8> png_sig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (magic == png_sig) return detail::decode_png(path);
    if (magic[0] == 0xFF && magic[1] == 0xD8) return detail::decode_jpeg(path);
    if (magic[0] == 'B' && magic[1] == 'M') return detail::decode_bmp(path);
    throw Error(ErrorKind::DecodeError, path.string() + ": unsupported image format");
}

/// Lossless PNG encoder. With 16 bits, a value v is stored as round(v * 65535 / 255).
inline void encode_png(const std::filesystem::path& path, const RgbImage& img, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorKind::InvalidArgument, "PNG bit depth must be 8 or 16");
    detail::FilePtr file = detail::open_file(path, "wb");
    std::string message = "PNG write failed";
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_error_fn,
                                              detail::png_warning_fn);
    if (!png) throw Error(ErrorKind::IoError, "libpng initialisation failed");
    png_infop info = png_create_info_struct(png);

    const std::size_t h = img.height(), w = img.width();
    const std::size_t bytes_per = bit_depth / 8;
    std::vector<unsigned char> buffer(h * w * 3 * bytes_per);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::array<double, 3> px = {img.r(r, c), img.g(r, c), img.b(r, c)};
            for (std::size_t k = 0; k < 3; ++k) {
                const std::size_t at = ((r * w + c) * 3 + k) * bytes_per;
                if (bit_depth == 8) {
                    buffer[at] = detail::to_byte(px[k]);
                } else {
                    const long v = std::clamp(std::lround(px[k] * 65535.0 / 255.0), 0L, 65535L);
                    buffer[at] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
                    buffer[at + 1] = static_cast<unsigned char>(v & 0xFF);
                }
            }
        }
    }
    std::vector<png_bytep> rows(h);
    for (std::size_t r = 0; r < h; ++r) rows[r] = buffer.data() + r * w * 3 * bytes_per;

    volatile bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
        failed = true;
    } else {
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                     PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    if (failed) throw Error(ErrorKind::IoError, path.string() + ": " + message);
}

inline void encode_jpeg(const std::filesystem::path& path, const RgbImage& img, int quality = 90) {
    detail::FilePtr file = detail::open_file(path, "wb");
    jpeg_compress_struct cinfo{};
    detail::JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = detail::jpeg_error_exit;
    std::vector<unsigned char> row(img.width() * 3);
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw Error(ErrorKind::IoError, path.string() + ": " + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file.get());
    cinfo.image_width = static_cast<JDIMENSION>(img.width());
    cinfo.image_height = static_cast<JDIMENSION>(img.height());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        const std::size_t r = cinfo.next_scanline;
        for (std::size_t c = 0; c < img.width(); ++c) {
            row[c * 3] = detail::to_byte(img.r(r, c));
            row[c * 3 + 1] = detail::to_byte(img.g(r, c));
            row[c * 3 + 2] = detail::to_byte(img.b(r, c));
        }
        JSAMPROW ptr = row.data();
        jpeg_write_scanlines(&cinfo, &ptr, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

/// Rounds every sample to the nearest integer in [0, 255], as an 8-bit encode would.
inline RgbImage quantize8(const RgbImage& img) {
    auto q = [](double v) { return static_cast<double>(detail::to_byte(v)); };
    return {map_plane(img.r, q), map_plane(img.g, q), map_plane(img.b, q)};
}

}  // namespace friquee::io
