#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

#include <png.h>

#include "ir/image.hpp"

namespace ir {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument(path + ": " + what);
}

bool has_suffix(const std::string& s, const char* suf) {
    const size_t n = std::strlen(suf);
    if (s.size() < n) return false;
    std::string tail = s.substr(s.size() - n);
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return tail == suf;
}

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Image from_interleaved(const std::vector<unsigned char>& bytes, int w, int h, int ch) {
    Image img(w, h, ch);
    for (int c = 0; c < ch; ++c) {
        float* dst = img.plane(c).data();
        for (size_t p = 0, n = img.pixel_count(); p < n; ++p)
            dst[p] = static_cast<float>(bytes[p * ch + c]) / 255.0f;
    }
    return img;
}

std::vector<unsigned char> to_interleaved(const Image& img) {
    std::vector<unsigned char> bytes(img.pixel_count() * img.channels);
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.plane(c).data();
        for (size_t p = 0, n = img.pixel_count(); p < n; ++p) {
            const float v = std::clamp(src[p], 0.0f, 1.0f);
            bytes[p * img.channels + c] =
                static_cast<unsigned char>(std::lround(v * 255.0f));
        }
    }
    return bytes;
}

Image load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail(path, "cannot open file");

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
        fail(path, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "libpng initialization failed");
    }
    std::vector<unsigned char> bytes;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "PNG decode error");
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unsupported bit depth (only 8-bit PNG is supported)");
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unsupported PNG channel layout");
    }

    bytes.resize(static_cast<size_t>(w) * h * ch);
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[y] = bytes.data() + static_cast<size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    return from_interleaved(bytes, w, h, ch);
}

void save_png(const Image& img, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(path, "cannot open file for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(path, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "PNG encode error");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> bytes = to_interleaved(img);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, bytes.data() + static_cast<size_t>(y) * img.width * img.channels);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(path, "cannot open file");

    std::string magic;
    f >> magic;
    if (magic != "P6") fail(path, "unsupported PPM variant (only P6 is supported)");

    auto next_token = [&]() -> long {
        // skip whitespace and '#' comments between header fields
        for (;;) {
            int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        long v = -1;
        f >> v;
        return v;
    };
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (!f || w <= 0 || h <= 0) fail(path, "malformed PPM header");
    if (maxval != 255) fail(path, "unsupported bit depth (only maxval 255 PPM is supported)");
    f.get(); // single whitespace before raster

    std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<size_t>(f.gcount()) != bytes.size()) fail(path, "truncated PPM raster");

    return from_interleaved(bytes, static_cast<int>(w), static_cast<int>(h), 3);
}

void save_ppm(const Image& img, const std::string& path) {
    if (img.channels != 3) fail(path, "PPM P6 output requires a 3-channel image");
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(path, "cannot open file for writing");
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> bytes = to_interleaved(img);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(path, "write failed");
}

} // namespace

Image load_image(const std::string& path) {
    Image img;
    if (has_suffix(path, ".ppm")) {
        img = load_ppm(path);
    } else if (has_suffix(path, ".png")) {
        img = load_png(path);
    } else {
        // sniff: PNG signature or PPM magic
        std::ifstream f(path, std::ios::binary);
        if (!f) fail(path, "cannot open file");
        char head[2] = {0, 0};
        f.read(head, 2);
        f.close();
        if (head[0] == 'P' && head[1] == '6') img = load_ppm(path);
        else img = load_png(path);
    }
    img.peak = 1.0f;
    img.validate();
    return img;
}

void save_image(const Image& img, const std::string& path) {
    img.validate();
    if (has_suffix(path, ".ppm")) save_ppm(img, path);
    else save_png(img, path);
}

} // namespace ir
