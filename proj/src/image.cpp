#include "ir/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ir/rng.hpp"

namespace ir {

void Image::validate() const {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("image has empty extent");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("image must have 1 or 3 channels");
    if (data.size() != static_cast<size_t>(width) * height * channels)
        throw std::invalid_argument("image data length does not match extents");
    if (!(peak > 0.0f))
        throw std::invalid_argument("image peak must be positive");
    for (float v : data)
        if (!std::isfinite(v))
            throw std::invalid_argument("image contains a non-finite sample");
}

double Kernel2D::sum() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

Kernel2D Kernel2D::flipped() const {
    Kernel2D out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.at(y, x) = at(height - 1 - y, width - 1 - x);
    return out;
}

void Kernel2D::validate() const {
    if (width <= 0 || height <= 0 || width % 2 == 0 || height % 2 == 0)
        throw std::invalid_argument("kernel extents must be odd and positive");
    if (weights.size() != static_cast<size_t>(width) * height)
        throw std::invalid_argument("kernel weight count does not match extents");
    for (double w : weights)
        if (!std::isfinite(w))
            throw std::invalid_argument("kernel contains a non-finite weight");
}

Image convolve(const Image& img, const Kernel2D& k) {
    img.validate();
    k.validate();
    if (k.width >= img.width || k.height >= img.height)
        throw std::invalid_argument("kernel must be smaller than the image");

    const int cx = k.width / 2;
    const int cy = k.height / 2;
    Image out(img.width, img.height, img.channels);
    out.peak = img.peak;

    for (int c = 0; c < img.channels; ++c) {
        const float* in = img.plane(c).data();
        float* dst = out.plane(c).data();
#pragma omp parallel for schedule(static)
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int ky = 0; ky < k.height; ++ky) {
                    const int sy = reflect101(y + ky - cy, img.height);
                    const float* row = in + static_cast<size_t>(sy) * img.width;
                    for (int kx = 0; kx < k.width; ++kx) {
                        const int sx = reflect101(x + kx - cx, img.width);
                        acc += k.at(ky, kx) * row[sx];
                    }
                }
                dst[static_cast<size_t>(y) * img.width + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

namespace {
constexpr double kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr double kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
} // namespace

Image sobel_magnitude(const Image& img) {
    img.validate();
    Image out(img.width, img.height, img.channels);
    out.peak = img.peak;

    for (int c = 0; c < img.channels; ++c) {
        const float* in = img.plane(c).data();
        float* dst = out.plane(c).data();
#pragma omp parallel for schedule(static)
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                double gx = 0.0, gy = 0.0;
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = reflect101(y + ky - 1, img.height);
                    const float* row = in + static_cast<size_t>(sy) * img.width;
                    for (int kx = 0; kx < 3; ++kx) {
                        const float v = row[reflect101(x + kx - 1, img.width)];
                        gx += kSobelX[ky * 3 + kx] * v;
                        gy += kSobelY[ky * 3 + kx] * v;
                    }
                }
                dst[static_cast<size_t>(y) * img.width + x] =
                    static_cast<float>(std::sqrt(gx * gx + gy * gy));
            }
        }
    }
    return out;
}

std::vector<Image> extract_patches(const Image& img, int size, int stride,
                                   uint64_t seed, int count) {
    img.validate();
    if (count <= 0) throw std::invalid_argument("patch count must be positive");
    if (stride <= 0) throw std::invalid_argument("patch stride must be positive");
    if (size <= 0 || size > std::min(img.width, img.height))
        throw std::invalid_argument("patch size exceeds image extent");

    const int nx = (img.width - size) / stride + 1;
    const int ny = (img.height - size) / stride + 1;
    const size_t grid = static_cast<size_t>(nx) * ny;

    // Partial Fisher-Yates over the position grid: without replacement until
    // the grid is exhausted, then reshuffled for another pass.
    Rng rng(derive_seed(seed, 0x70617463 /* "patc" */));
    std::vector<size_t> order(grid);
    std::iota(order.begin(), order.end(), size_t{0});
    std::vector<size_t> picks;
    picks.reserve(count);
    size_t cursor = grid;
    for (int i = 0; i < count; ++i) {
        if (cursor == grid) {
            for (size_t j = grid - 1; j > 0; --j)
                std::swap(order[j], order[rng.next_u64() % (j + 1)]);
            cursor = 0;
        }
        picks.push_back(order[cursor++]);
    }

    std::vector<Image> out;
    out.reserve(count);
    for (size_t p : picks) {
        const int px = static_cast<int>(p % nx) * stride;
        const int py = static_cast<int>(p / nx) * stride;
        Image patch(size, size, img.channels);
        patch.peak = img.peak;
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    patch.at(c, y, x) = img.at(c, py + y, px + x);
        out.push_back(std::move(patch));
    }
    return out;
}

Image clamp01(Image img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

} // namespace ir
