#include "ir/reference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ir::ref {

namespace {
int mirror(int i, int n) {
    if (n == 1) return 0;
    const int p = 2 * n - 2;
    i = ((i % p) + p) % p;
    return i < n ? i : p - i;
}

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("image shape mismatch");
}
} // namespace

Image convolve(const Image& img, const Kernel2D& k) {
    Image out(img.width, img.height, img.channels);
    out.peak = img.peak;
    const int cx = k.width / 2, cy = k.height / 2;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int ky = 0; ky < k.height; ++ky)
                    for (int kx = 0; kx < k.width; ++kx)
                        acc += k.at(ky, kx) *
                               img.at(c, mirror(y + ky - cy, img.height),
                                      mirror(x + kx - cx, img.width));
                out.at(c, y, x) = static_cast<float>(acc);
            }
    return out;
}

Image sobel_magnitude(const Image& img) {
    static const double sx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const double sy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    Image out(img.width, img.height, img.channels);
    out.peak = img.peak;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double gx = 0.0, gy = 0.0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const double v = img.at(c, mirror(y + ky - 1, img.height),
                                                mirror(x + kx - 1, img.width));
                        gx += sx[ky][kx] * v;
                        gy += sy[ky][kx] * v;
                    }
                out.at(c, y, x) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
            }
    return out;
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    double acc = 0.0;
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                const double d = static_cast<double>(a.at(c, y, x)) - b.at(c, y, x);
                acc += d * d;
            }
    return acc / static_cast<double>(a.sample_count());
}

double psnr(const Image& a, const Image& b, double peak) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b);
    constexpr int R = 5; // 11x11 window
    constexpr double kSigma = 1.5;
    const double peak = a.peak;
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    double win[11][11];
    double wsum = 0.0;
    for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx) {
            win[dy + R][dx + R] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            wsum += win[dy + R][dx + R];
        }
    for (auto& row : win)
        for (double& v : row) v /= wsum;

    double total = 0.0;
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = -R; dy <= R; ++dy)
                    for (int dx = -R; dx <= R; ++dx) {
                        const double w = win[dy + R][dx + R];
                        const double va = a.at(c, mirror(y + dy, a.height), mirror(x + dx, a.width));
                        const double vb = b.at(c, mirror(y + dy, b.height), mirror(x + dx, b.width));
                        ma += w * va;
                        mb += w * vb;
                        saa += w * va * va;
                        sbb += w * vb * vb;
                        sab += w * va * vb;
                    }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                total += num / den;
            }
    return total / static_cast<double>(a.sample_count());
}

double edge_loss(const Image& a, const Image& b) {
    require_same_shape(a, b);
    const Image ga = ref::sobel_magnitude(a);
    const Image gb = ref::sobel_magnitude(b);
    double acc = 0.0;
    for (size_t i = 0; i < ga.data.size(); ++i)
        acc += std::abs(static_cast<double>(ga.data[i]) - gb.data[i]);
    return acc / static_cast<double>(ga.sample_count());
}

void conv2d_nchw(const float* x, int n, int ic, int h, int w,
                 const float* weight, const float* bias, int oc, int ksize,
                 float* y) {
    const int pad = ksize / 2;
    for (int in = 0; in < n; ++in)
        for (int o = 0; o < oc; ++o)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    double acc = bias ? bias[o] : 0.0;
                    for (int i = 0; i < ic; ++i)
                        for (int ky = 0; ky < ksize; ++ky)
                            for (int kx = 0; kx < ksize; ++kx) {
                                const int sy = yy + ky - pad;
                                const int sx = xx + kx - pad;
                                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                                acc += static_cast<double>(
                                           weight[((static_cast<size_t>(o) * ic + i) * ksize + ky) * ksize + kx]) *
                                       x[((static_cast<size_t>(in) * ic + i) * h + sy) * w + sx];
                            }
                    y[((static_cast<size_t>(in) * oc + o) * h + yy) * w + xx] =
                        static_cast<float>(acc);
                }
}

} // namespace ir::ref
