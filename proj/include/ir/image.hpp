#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ir {

// Planar channel-major raster with samples in [0, 1]. `peak` is the dynamic
// range maximum used by PSNR, not the per-image sample maximum.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    float peak = 1.0f;
    std::vector<float> data; // layout [channel][row][col]

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    size_t sample_count() const { return data.size(); }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    std::span<float> plane(int c) {
        return {data.data() + static_cast<size_t>(c) * pixel_count(), pixel_count()};
    }
    std::span<const float> plane(int c) const {
        return {data.data() + static_cast<size_t>(c) * pixel_count(), pixel_count()};
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    // Throws std::invalid_argument if any structural invariant is broken
    // (size mismatch, non-finite sample, peak <= 0).
    void validate() const;
};

// 2-D kernel with odd extents so the center tap is defined.
struct Kernel2D {
    int width = 0;
    int height = 0;
    std::vector<double> weights; // [row][col]

    Kernel2D() = default;
    Kernel2D(int w, int h, double fill = 0.0)
        : width(w), height(h), weights(static_cast<size_t>(w) * h, fill) {}

    double& at(int y, int x) { return weights[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return weights[static_cast<size_t>(y) * width + x]; }

    double sum() const;
    Kernel2D flipped() const; // rotated 180 degrees

    static Kernel2D identity() {
        Kernel2D k(1, 1);
        k.weights[0] = 1.0;
        return k;
    }

    void validate() const;
};

// reflect-101 index mapping: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// 8-bit PNG (gray or RGB) and PPM P6 decode; samples mapped byte/255.
Image load_image(const std::string& path);

// Clamps to [0,1], quantizes round(v*255), writes PNG or PPM by extension.
void save_image(const Image& img, const std::string& path);

// Per-channel 2-D correlation with reflect-101 borders. Output shape equals
// input shape. Kernel must be strictly smaller than the image in both dims.
Image convolve(const Image& img, const Kernel2D& k);

// Per-channel gradient magnitude sqrt(Gx^2 + Gy^2) with the 3x3 Sobel
// stencils and reflect-101 borders. Output is not clamped.
Image sobel_magnitude(const Image& img);

// Seeded sampling of `count` size x size patches whose top-left corners lie
// on the stride grid. Sampling is without replacement while the grid lasts.
std::vector<Image> extract_patches(const Image& img, int size, int stride,
                                   uint64_t seed, int count);

Image clamp01(Image img);

} // namespace ir
