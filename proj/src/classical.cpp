#include "ir/classical.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace ir::classical {

namespace {

Kernel2D gaussian_kernel_2d(double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    Kernel2D k(2 * r + 1, 2 * r + 1);
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double w = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            k.at(y + r, x + r) = w;
            sum += w;
        }
    for (double& w : k.weights) w /= sum;
    return k;
}

void require_normalized(const Kernel2D& k) {
    k.validate();
    if (std::abs(k.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("kernel must be normalized to sum 1");
}

} // namespace

Image gaussian_denoise(const Image& img, double sigma) {
    img.validate();
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be > 0");
    return convolve(img, gaussian_kernel_2d(sigma));
}

Image bilateral_denoise(const Image& img, double sigma_s, double sigma_r) {
    img.validate();
    if (!(sigma_s > 0.0) || !(sigma_r > 0.0))
        throw std::invalid_argument("bilateral sigmas must be > 0");

    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_s)));
    std::vector<double> spatial((2 * r + 1) * (2 * r + 1));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            spatial[(dy + r) * (2 * r + 1) + dx + r] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s));

    const double inv2sr2 = 1.0 / (2.0 * sigma_r * sigma_r);
    Image out(img.width, img.height, img.channels);
    out.peak = img.peak;
    for (int c = 0; c < img.channels; ++c) {
        const float* in = img.plane(c).data();
        float* dst = out.plane(c).data();
#pragma omp parallel for schedule(static)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double v0 = in[static_cast<size_t>(y) * img.width + x];
                double num = 0.0, den = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int sy = reflect101(y + dy, img.height);
                    const float* row = in + static_cast<size_t>(sy) * img.width;
                    for (int dx = -r; dx <= r; ++dx) {
                        const double v = row[reflect101(x + dx, img.width)];
                        const double d = v - v0;
                        const double w = spatial[(dy + r) * (2 * r + 1) + dx + r] *
                                         std::exp(-d * d * inv2sr2);
                        num += w * v;
                        den += w;
                    }
                }
                dst[static_cast<size_t>(y) * img.width + x] = static_cast<float>(num / den);
            }
    }
    return out;
}

double estimate_noise_sigma(const Image& img, int channel) {
    // MAD of the Immerkaer residual: the stencil maps iid noise of std s to
    // std 6s, and median|N(0,1)| = 0.67449.
    static const double M[3][3] = {{1, -2, 1}, {-2, 4, -2}, {1, -2, 1}};
    if (img.width < 3 || img.height < 3) return 0.0;
    std::vector<double> resid;
    resid.reserve(static_cast<size_t>(img.width - 2) * (img.height - 2));
    for (int y = 1; y < img.height - 1; ++y)
        for (int x = 1; x < img.width - 1; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    acc += M[dy + 1][dx + 1] * img.at(channel, y + dy, x + dx);
            resid.push_back(std::abs(acc));
        }
    const size_t mid = resid.size() / 2;
    std::nth_element(resid.begin(), resid.begin() + mid, resid.end());
    return resid[mid] / (6.0 * 0.6744897501960817);
}

Image nlm_denoise(const Image& img, int patch_radius, int search_radius, double h) {
    img.validate();
    if (patch_radius < 1 || search_radius < 1)
        throw std::invalid_argument("nlm radii must be >= 1");
    if (!(h > 0.0)) throw std::invalid_argument("nlm filtering strength must be > 0");
    const int need = 2 * (patch_radius + search_radius) + 1;
    if (need > img.width || need > img.height)
        throw std::invalid_argument("nlm window exceeds image extent");

    const int P = patch_radius, S = search_radius;
    const double npatch = static_cast<double>((2 * P + 1) * (2 * P + 1));
    const double inv_h2 = 1.0 / (h * h);

    Image out(img.width, img.height, img.channels);
    out.peak = img.peak;
    for (int c = 0; c < img.channels; ++c) {
        const double sigma2 = 2.0 * [&] {
            const double s = estimate_noise_sigma(img, c);
            return s * s;
        }();
        const float* in = img.plane(c).data();
        float* dst = out.plane(c).data();
        const int W = img.width, H = img.height;
        auto sample = [&](int y, int x) -> double {
            return in[static_cast<size_t>(reflect101(y, H)) * W + reflect101(x, W)];
        };
#pragma omp parallel for schedule(dynamic, 4)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double num = 0.0, den = 0.0, wmax = 0.0;
                for (int dy = -S; dy <= S; ++dy)
                    for (int dx = -S; dx <= S; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        double d2 = 0.0;
                        for (int py = -P; py <= P; ++py)
                            for (int px = -P; px <= P; ++px) {
                                const double d = sample(y + py, x + px) -
                                                 sample(y + dy + py, x + dx + px);
                                d2 += d * d;
                            }
                        d2 /= npatch;
                        const double w = std::exp(-std::max(d2 - sigma2, 0.0) * inv_h2);
                        wmax = std::max(wmax, w);
                        num += w * sample(y + dy, x + dx);
                        den += w;
                    }
                // center pixel participates with the strongest neighbor weight
                num += wmax * sample(y, x);
                den += wmax;
                dst[static_cast<size_t>(y) * W + x] =
                    static_cast<float>(den > 0.0 ? num / den : sample(y, x));
            }
    }
    return out;
}

Image anisotropic_diffuse(const Image& img, int iterations, double K, double dt) {
    img.validate();
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(K > 0.0)) throw std::invalid_argument("edge threshold K must be > 0");
    if (!(dt > 0.0) || dt > 0.25)
        throw std::invalid_argument("diffusion step dt must lie in (0, 0.25]");

    const int W = img.width, H = img.height;
    Image out(W, H, img.channels);
    out.peak = img.peak;
    const double invK2 = 1.0 / (K * K);

    std::vector<double> u(img.pixel_count()), next(img.pixel_count());
    for (int c = 0; c < img.channels; ++c) {
        auto plane = img.plane(c);
        std::copy(plane.begin(), plane.end(), u.begin());
        for (int it = 0; it < iterations; ++it) {
#pragma omp parallel for schedule(static)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const double v = u[static_cast<size_t>(y) * W + x];
                    double flux = 0.0;
                    // Neumann boundary: missing neighbors carry no flux
                    auto add = [&](int yy, int xx) {
                        const double d = u[static_cast<size_t>(yy) * W + xx] - v;
                        flux += std::exp(-d * d * invK2) * d;
                    };
                    if (y > 0) add(y - 1, x);
                    if (y < H - 1) add(y + 1, x);
                    if (x > 0) add(y, x - 1);
                    if (x < W - 1) add(y, x + 1);
                    next[static_cast<size_t>(y) * W + x] = v + dt * flux;
                }
            std::swap(u, next);
        }
        float* dst = out.plane(c).data();
        for (size_t i = 0; i < u.size(); ++i) dst[i] = static_cast<float>(u[i]);
    }
    return out;
}

Image tv_denoise(const Image& img, double lambda, int iterations) {
    img.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("tv lambda must be > 0");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");

    // Chambolle's dual projection for (lambda/2)||u-f||^2 + TV(u) with
    // theta = 1/lambda: u = f - theta * div p.
    const double theta = 1.0 / lambda;
    const double tau = 0.125;
    const int W = img.width, H = img.height;
    const size_t n = img.pixel_count();

    Image out(W, H, img.channels);
    out.peak = img.peak;
    std::vector<double> px(n), py(n), div(n), f(n);
    for (int c = 0; c < img.channels; ++c) {
        auto plane = img.plane(c);
        std::copy(plane.begin(), plane.end(), f.begin());
        std::fill(px.begin(), px.end(), 0.0);
        std::fill(py.begin(), py.end(), 0.0);

        for (int it = 0; it < iterations; ++it) {
#pragma omp parallel for schedule(static)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const size_t i = static_cast<size_t>(y) * W + x;
                    double d = px[i] + py[i];
                    if (x > 0) d -= px[i - 1];
                    if (x == W - 1) d -= px[i];
                    if (y > 0) d -= py[i - W];
                    if (y == H - 1) d -= py[i];
                    div[i] = d - f[i] / theta;
                }
#pragma omp parallel for schedule(static)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const size_t i = static_cast<size_t>(y) * W + x;
                    const double gx = x < W - 1 ? div[i + 1] - div[i] : 0.0;
                    const double gy = y < H - 1 ? div[i + W] - div[i] : 0.0;
                    const double mag = std::sqrt(gx * gx + gy * gy);
                    px[i] = (px[i] + tau * gx) / (1.0 + tau * mag);
                    py[i] = (py[i] + tau * gy) / (1.0 + tau * mag);
                }
        }

        float* dst = out.plane(c).data();
#pragma omp parallel for schedule(static)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const size_t i = static_cast<size_t>(y) * W + x;
                double d = px[i] + py[i];
                if (x > 0) d -= px[i - 1];
                if (x == W - 1) d -= px[i];
                if (y > 0) d -= py[i - W];
                if (y == H - 1) d -= py[i];
                dst[i] = static_cast<float>(f[i] - theta * d);
            }
    }
    return out;
}

Image richardson_lucy(const Image& img, const Kernel2D& k, int iterations) {
    img.validate();
    require_normalized(k);
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    for (float v : img.data)
        if (v < 0.0f) throw std::invalid_argument("richardson-lucy input must be >= 0");

    const Kernel2D kt = k.flipped();
    Image u = img;
    Image ratio(img.width, img.height, img.channels);
    ratio.peak = img.peak;
    for (int it = 0; it < iterations; ++it) {
        const Image blurred = convolve(u, k);
        for (size_t i = 0; i < ratio.data.size(); ++i)
            ratio.data[i] = img.data[i] / std::max(blurred.data[i], 1e-8f);
        const Image corr = convolve(ratio, kt);
        for (size_t i = 0; i < u.data.size(); ++i)
            u.data[i] = std::max(0.0f, u.data[i] * corr.data[i]);
    }
    return clamp01(std::move(u));
}

namespace {

std::mutex fftw_plan_mutex; // FFTW plan creation is not thread-safe

// cosine ramp over `margin` pixels at both ends, 1 in the middle
std::vector<double> taper_profile(int n, int margin) {
    margin = std::min(margin, n / 2);
    std::vector<double> w(n, 1.0);
    for (int i = 0; i < margin; ++i) {
        const double a = 0.5 * (1.0 - std::cos(3.14159265358979323846 * (i + 0.5) / margin));
        w[i] = a;
        w[n - 1 - i] = a;
    }
    return w;
}

} // namespace

Image wiener_deconvolve(const Image& img, const Kernel2D& k, double nsr) {
    img.validate();
    require_normalized(k);
    if (nsr < 0.0) throw std::invalid_argument("noise-to-signal ratio must be >= 0");

    const int W = img.width, H = img.height;
    const size_t n = img.pixel_count();
    const int freq_w = W / 2 + 1;

    // blend toward the kernel-blurred image near the borders so the periodic
    // extension has no seam
    const Image blurred = convolve(img, k);
    const std::vector<double> wx = taper_profile(W, k.width);
    const std::vector<double> wy = taper_profile(H, k.height);

    std::vector<double> spatial(n);
    std::vector<fftw_complex> freq(static_cast<size_t>(H) * freq_w);
    std::vector<fftw_complex> kernel_freq(static_cast<size_t>(H) * freq_w);

    fftw_plan fwd, inv;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fwd = fftw_plan_dft_r2c_2d(H, W, spatial.data(), freq.data(), FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_2d(H, W, freq.data(), spatial.data(), FFTW_ESTIMATE);
    }

    // kernel embedded with its center at the origin, wrapped
    std::fill(spatial.begin(), spatial.end(), 0.0);
    const int cy = k.height / 2, cx = k.width / 2;
    for (int ky = 0; ky < k.height; ++ky)
        for (int kx = 0; kx < k.width; ++kx) {
            const int y = ((ky - cy) % H + H) % H;
            const int x = ((kx - cx) % W + W) % W;
            spatial[static_cast<size_t>(y) * W + x] += k.at(ky, kx);
        }
    fftw_execute_dft_r2c(fwd, spatial.data(), kernel_freq.data());

    Image out(W, H, img.channels);
    out.peak = img.peak;
    for (int c = 0; c < img.channels; ++c) {
        const float* in = img.plane(c).data();
        const float* bl = blurred.plane(c).data();
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const size_t i = static_cast<size_t>(y) * W + x;
                const double a = wy[y] * wx[x];
                spatial[i] = a * in[i] + (1.0 - a) * bl[i];
            }
        fftw_execute_dft_r2c(fwd, spatial.data(), freq.data());
        for (size_t i = 0; i < freq.size(); ++i) {
            const double hr = kernel_freq[i][0], hi = kernel_freq[i][1];
            const double denom = hr * hr + hi * hi + nsr;
            const double fr = freq[i][0], fi = freq[i][1];
            // conj(H) * F / (|H|^2 + nsr)
            freq[i][0] = (hr * fr + hi * fi) / denom;
            freq[i][1] = (hr * fi - hi * fr) / denom;
        }
        fftw_execute_dft_c2r(inv, freq.data(), spatial.data());
        float* dst = out.plane(c).data();
        const double scale = 1.0 / (static_cast<double>(W) * H);
        for (size_t i = 0; i < n; ++i)
            dst[i] = static_cast<float>(std::clamp(spatial[i] * scale, 0.0, 1.0));
    }

    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    return out;
}

Image restore(const Image& img, const RestoreConfig& cfg, const Kernel2D* blur_kernel) {
    auto param = [&](const char* name, double fallback) {
        auto it = cfg.params.find(name);
        return it == cfg.params.end() ? fallback : it->second;
    };
    const Kernel2D kernel = blur_kernel ? *blur_kernel : Kernel2D::identity();

    if (cfg.method == "identity") return img;
    if (cfg.method == "gaussian") return gaussian_denoise(img, param("sigma", 0.8));
    if (cfg.method == "bilateral")
        return bilateral_denoise(img, param("sigma_s", 1.8), param("sigma_r", 0.2));
    if (cfg.method == "nlm")
        return nlm_denoise(img, static_cast<int>(param("patch", 1)),
                           static_cast<int>(param("search", 5)), param("h", 0.12));
    if (cfg.method == "anisotropic")
        return anisotropic_diffuse(img, static_cast<int>(param("iterations", 12)),
                                   param("K", 0.08), param("dt", 0.2));
    if (cfg.method == "tv")
        return tv_denoise(img, param("lambda", 12.0), static_cast<int>(param("iterations", 80)));
    if (cfg.method == "rl")
        return richardson_lucy(img, kernel, static_cast<int>(param("iterations", 30)));
    if (cfg.method == "wiener") return wiener_deconvolve(img, kernel, param("nsr", 1e-3));
    throw std::invalid_argument("unknown restoration method: " + cfg.method);
}

} // namespace ir::classical
