#include "fanet/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <vector>

namespace fanet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decode any PNG to packed 8-bit RGB rows.
void decode_rgb8(const std::string& path, std::vector<unsigned char>& pixels, int& width,
                 int& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png decoder setup failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt png: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    pixels.assign(static_cast<std::size_t>(width) * height * 3, 0);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

void encode_png(const std::string& path, const std::vector<unsigned char>& pixels, int width,
                int height, int color_type) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png encoder setup failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const int stride = color_type == PNG_COLOR_TYPE_RGB ? width * 3 : width;
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * stride);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

unsigned char to_byte(float v) {
    return static_cast<unsigned char>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
}

}  // namespace

Tensor read_image_png(const std::string& path) {
    std::vector<unsigned char> pixels;
    int w = 0, h = 0;
    decode_rgb8(path, pixels, w, h);
    Tensor t(Shape{1, 3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                t.at(0, c, y, x) =
                    pixels[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] /
                    255.0f;
            }
    return t;
}

Tensor read_mask_png(const std::string& path) {
    std::vector<unsigned char> pixels;
    int w = 0, h = 0;
    decode_rgb8(path, pixels, w, h);
    Tensor t(Shape{1, 1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const unsigned char v = pixels[(static_cast<std::size_t>(y) * w + x) * 3];
            t.at(0, 0, y, x) = v >= 128 ? 1.0f : 0.0f;
        }
    return t;
}

void write_image_png(const std::string& path, const Tensor& image) {
    const Shape s = image.shape();
    if (s.b != 1 || s.c != 3) {
        throw ValidationError("image png writer expects shape (1,3,H,W), got " + s.str());
    }
    std::vector<unsigned char> pixels(static_cast<std::size_t>(s.h) * s.w * 3);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < 3; ++c) {
                pixels[(static_cast<std::size_t>(y) * s.w + x) * 3 + static_cast<std::size_t>(c)] =
                    to_byte(image.at(0, c, y, x));
            }
    encode_png(path, pixels, s.w, s.h, PNG_COLOR_TYPE_RGB);
}

void write_mask_png(const std::string& path, const Tensor& mask) {
    const Shape s = mask.shape();
    if (s.b != 1 || s.c != 1) {
        throw ValidationError("mask png writer expects shape (1,1,H,W), got " + s.str());
    }
    std::vector<unsigned char> pixels(static_cast<std::size_t>(s.h) * s.w);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            pixels[static_cast<std::size_t>(y) * s.w + x] =
                mask.at(0, 0, y, x) >= 0.5f ? 255 : 0;
        }
    encode_png(path, pixels, s.w, s.h, PNG_COLOR_TYPE_GRAY);
}

}  // namespace fanet
