#include "ir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ir::metrics {

namespace {
void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("image shape mismatch");
}

// Deterministic parallel reduction: per-row partials accumulated by a single
// thread each, combined serially in fixed order. Results do not depend on
// the thread count.
template <typename RowFn>
double rowwise_sum(int rows, RowFn&& fn) {
    std::vector<double> partial(rows, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) partial[r] = fn(r);
    double acc = 0.0;
    for (double v : partial) acc += v;
    return acc;
}
} // namespace

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    const int rows = a.height * a.channels;
    const int w = a.width;
    const double total = rowwise_sum(rows, [&](int r) {
        const float* pa = a.data.data() + static_cast<size_t>(r) * w;
        const float* pb = b.data.data() + static_cast<size_t>(r) * w;
        double s = 0.0;
        for (int x = 0; x < w; ++x) {
            const double d = static_cast<double>(pa[x]) - pb[x];
            s += d * d;
        }
        return s;
    });
    return total / static_cast<double>(a.sample_count());
}

double psnr_from_mse(double mse_value, double peak) {
    if (peak <= 0.0) throw std::invalid_argument("peak must be positive");
    if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const Image& a, const Image& b, double peak) {
    return psnr_from_mse(mse(a, b), peak);
}

double psnr(const Image& a, const Image& b) { return psnr(a, b, a.peak); }

namespace {
constexpr int kWinRadius = 5;
constexpr int kWinSize = 2 * kWinRadius + 1;

const std::vector<double>& gaussian_window_1d() {
    static const std::vector<double> g = [] {
        std::vector<double> v(kWinSize);
        double sum = 0.0;
        for (int i = 0; i < kWinSize; ++i) {
            const double d = i - kWinRadius;
            v[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += v[i];
        }
        for (double& x : v) x /= sum;
        return v;
    }();
    return g;
}

// Reflect-101 pad of one channel plane into a (h+2R) x (w+2R) double buffer.
std::vector<double> pad_plane(const Image& img, int c) {
    const int ph = img.height + 2 * kWinRadius;
    const int pw = img.width + 2 * kWinRadius;
    std::vector<double> out(static_cast<size_t>(ph) * pw);
    for (int y = 0; y < ph; ++y) {
        const int sy = reflect101(y - kWinRadius, img.height);
        for (int x = 0; x < pw; ++x)
            out[static_cast<size_t>(y) * pw + x] =
                img.at(c, sy, reflect101(x - kWinRadius, img.width));
    }
    return out;
}

// Separable valid correlation with the Gaussian window. in: ph x pw,
// out: (ph-2R) x (pw-2R).
void window_filter(const std::vector<double>& in, int ph, int pw,
                   std::vector<double>& tmp, std::vector<double>& out) {
    const auto& g = gaussian_window_1d();
    const int w = pw - 2 * kWinRadius;
    const int h = ph - 2 * kWinRadius;
    tmp.assign(static_cast<size_t>(ph) * w, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWinSize; ++k)
                s += g[k] * in[static_cast<size_t>(y) * pw + x + k];
            tmp[static_cast<size_t>(y) * w + x] = s;
        }
    out.assign(static_cast<size_t>(h) * w, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWinSize; ++k)
                s += g[k] * tmp[static_cast<size_t>(y + k) * w + x];
            out[static_cast<size_t>(y) * w + x] = s;
        }
}
} // namespace

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b);
    if (std::min(a.width, a.height) < kWinSize)
        throw std::invalid_argument("image smaller than the 11x11 SSIM window");

    const double peak = a.peak;
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const int h = a.height, w = a.width;
    const int ph = h + 2 * kWinRadius, pw = w + 2 * kWinRadius;

    double total = 0.0;
    std::vector<double> tmp, ma, mb, saa, sbb, sab, prod(static_cast<size_t>(ph) * pw);
    for (int c = 0; c < a.channels; ++c) {
        const std::vector<double> pa = pad_plane(a, c);
        const std::vector<double> pb = pad_plane(b, c);
        window_filter(pa, ph, pw, tmp, ma);
        window_filter(pb, ph, pw, tmp, mb);
        for (size_t i = 0; i < prod.size(); ++i) prod[i] = pa[i] * pa[i];
        window_filter(prod, ph, pw, tmp, saa);
        for (size_t i = 0; i < prod.size(); ++i) prod[i] = pb[i] * pb[i];
        window_filter(prod, ph, pw, tmp, sbb);
        for (size_t i = 0; i < prod.size(); ++i) prod[i] = pa[i] * pb[i];
        window_filter(prod, ph, pw, tmp, sab);

        std::vector<double> rowsum(h, 0.0);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            double s = 0.0;
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                const double mu_a = ma[i], mu_b = mb[i];
                const double var_a = saa[i] - mu_a * mu_a;
                const double var_b = sbb[i] - mu_b * mu_b;
                const double cov = sab[i] - mu_a * mu_b;
                const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                s += num / den;
            }
            rowsum[y] = s;
        }
        for (double v : rowsum) total += v;
    }
    return total / static_cast<double>(a.sample_count());
}

double edge_loss(const Image& a, const Image& b) {
    require_same_shape(a, b);
    const Image ga = sobel_magnitude(a);
    const Image gb = sobel_magnitude(b);
    const int rows = a.height * a.channels;
    const int w = a.width;
    const double total = rowwise_sum(rows, [&](int r) {
        const float* pa = ga.data.data() + static_cast<size_t>(r) * w;
        const float* pb = gb.data.data() + static_cast<size_t>(r) * w;
        double s = 0.0;
        for (int x = 0; x < w; ++x)
            s += std::abs(static_cast<double>(pa[x]) - pb[x]);
        return s;
    });
    return total / static_cast<double>(a.sample_count());
}

MetricReport evaluate(const Image& result, const Image& reference) {
    MetricReport r;
    r.mse = mse(result, reference);
    r.psnr = psnr_from_mse(r.mse, reference.peak);
    r.ssim = ssim(result, reference);
    r.edge_loss = edge_loss(result, reference);
    return r;
}

std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace ir::metrics
