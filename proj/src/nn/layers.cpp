#include "ir/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ir::nn {

namespace {

void require_shape(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// zero-pad all planes by `pad` on each side
Tensor zero_pad(const Tensor& x, int pad) {
    Tensor out(x.n, x.c, x.h + 2 * pad, x.w + 2 * pad);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const float* src = x.plane(in, ic);
            float* dst = out.plane(in, ic);
            for (int y = 0; y < x.h; ++y)
                std::copy(src + static_cast<size_t>(y) * x.w,
                          src + static_cast<size_t>(y + 1) * x.w,
                          dst + static_cast<size_t>(y + pad) * out.w + pad);
        }
    return out;
}

} // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int kernel_size)
    : in_c(in_channels), out_c(out_channels), ksize(kernel_size),
      weight(out_channels, in_channels, kernel_size, kernel_size),
      bias(out_channels, 1, 1, 1),
      gweight(out_channels, in_channels, kernel_size, kernel_size),
      gbias(out_channels, 1, 1, 1) {
    if (kernel_size != 1 && kernel_size != 3)
        throw std::invalid_argument("conv kernel size must be 1 or 3");
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    require_shape(x.c == in_c, "conv input channel mismatch");
    const int pad = ksize / 2;
    const Tensor xp = pad > 0 ? zero_pad(x, pad) : x;
    Tensor y(x.n, out_c, x.h, x.w);

    const int H = x.h, W = x.w, K = ksize;
    const int pw = xp.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int o = 0; o < out_c; ++o) {
            float* dst = y.plane(in, o);
            const float b = bias.data[o];
            for (size_t i = 0, n = static_cast<size_t>(H) * W; i < n; ++i) dst[i] = b;
            for (int i = 0; i < in_c; ++i) {
                const float* wbase = weight.plane(o, i);
                const float* src = xp.plane(in, i);
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        const float wv = wbase[ky * K + kx];
                        if (wv == 0.0f) continue;
                        for (int yy = 0; yy < H; ++yy) {
                            const float* row = src + static_cast<size_t>(yy + ky) * pw + kx;
                            float* out_row = dst + static_cast<size_t>(yy) * W;
                            for (int xx = 0; xx < W; ++xx)
                                out_row[xx] += wv * row[xx];
                        }
                    }
            }
        }

    if (train) x_cache = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const Tensor& x = x_cache;
    require_shape(x.size() > 0, "conv backward without cached forward");
    require_shape(gy.n == x.n && gy.c == out_c && gy.h == x.h && gy.w == x.w,
                  "conv output gradient shape mismatch");

    const int pad = ksize / 2;
    const int H = x.h, W = x.w, K = ksize;
    const Tensor xp = pad > 0 ? zero_pad(x, pad) : x;
    const int pw = xp.w;

    // parameter gradients: one (o, i) pair per task, serial inside
#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < out_c; ++o)
        for (int i = 0; i < in_c; ++i) {
            float* gw = gweight.plane(o, i);
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    double acc = 0.0;
                    for (int in = 0; in < x.n; ++in) {
                        const float* g = gy.plane(in, o);
                        const float* src = xp.plane(in, i);
                        for (int yy = 0; yy < H; ++yy) {
                            const float* grow = g + static_cast<size_t>(yy) * W;
                            const float* xrow = src + static_cast<size_t>(yy + ky) * pw + kx;
                            for (int xx = 0; xx < W; ++xx)
                                acc += static_cast<double>(grow[xx]) * xrow[xx];
                        }
                    }
                    gw[ky * K + kx] += static_cast<float>(acc);
                }
        }
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_c; ++o) {
        double acc = 0.0;
        for (int in = 0; in < x.n; ++in) {
            const float* g = gy.plane(in, o);
            for (size_t i = 0, n = static_cast<size_t>(H) * W; i < n; ++i) acc += g[i];
        }
        gbias.data[o] += static_cast<float>(acc);
    }

    // input gradient: full correlation of gy with the flipped kernel
    const Tensor gyp = pad > 0 ? zero_pad(gy, pad) : gy;
    const int gpw = gyp.w;
    Tensor gx(x.n, in_c, H, W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int i = 0; i < in_c; ++i) {
            float* dst = gx.plane(in, i);
            for (int o = 0; o < out_c; ++o) {
                const float* wbase = weight.plane(o, i);
                const float* src = gyp.plane(in, o);
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        const float wv = wbase[(K - 1 - ky) * K + (K - 1 - kx)];
                        if (wv == 0.0f) continue;
                        for (int yy = 0; yy < H; ++yy) {
                            const float* row = src + static_cast<size_t>(yy + ky) * gpw + kx;
                            float* out_row = dst + static_cast<size_t>(yy) * W;
                            for (int xx = 0; xx < W; ++xx)
                                out_row[xx] += wv * row[xx];
                        }
                    }
            }
        }

    x_cache = Tensor{};
    return gx;
}

void Conv2d::zero_grad() {
    std::fill(gweight.data.begin(), gweight.data.end(), 0.0f);
    std::fill(gbias.data.begin(), gbias.data.end(), 0.0f);
}

BatchNorm2d::BatchNorm2d(int c)
    : channels(c), gamma(1, c, 1, 1, 1.0f), beta(1, c, 1, 1, 0.0f),
      running_mean(1, c, 1, 1, 0.0f), running_var(1, c, 1, 1, 1.0f),
      ggamma(1, c, 1, 1), gbeta(1, c, 1, 1) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    require_shape(x.c == channels, "batchnorm channel mismatch");
    Tensor y(x.n, x.c, x.h, x.w);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t count = static_cast<size_t>(x.n) * plane;

    if (!train) {
        // fixed affine map from running statistics
#pragma omp parallel for schedule(static)
        for (int c = 0; c < channels; ++c) {
            const double inv = 1.0 / std::sqrt(static_cast<double>(running_var.data[c]) + eps);
            const double g = gamma.data[c] * inv;
            const double b = beta.data[c] - g * running_mean.data[c];
            for (int in = 0; in < x.n; ++in) {
                const float* src = x.plane(in, c);
                float* dst = y.plane(in, c);
                for (size_t i = 0; i < plane; ++i)
                    dst[i] = static_cast<float>(g * src[i] + b);
            }
        }
        return y;
    }

    xhat_cache = Tensor(x.n, x.c, x.h, x.w);
    inv_std_cache.assign(channels, 0.0);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int in = 0; in < x.n; ++in) {
            const float* src = x.plane(in, c);
            for (size_t i = 0; i < plane; ++i) {
                sum += src[i];
                sq += static_cast<double>(src[i]) * src[i];
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std_cache[c] = inv;

        const double g = gamma.data[c];
        const double b = beta.data[c];
        for (int in = 0; in < x.n; ++in) {
            const float* src = x.plane(in, c);
            float* xh = xhat_cache.plane(in, c);
            float* dst = y.plane(in, c);
            for (size_t i = 0; i < plane; ++i) {
                const double h = (src[i] - mean) * inv;
                xh[i] = static_cast<float>(h);
                dst[i] = static_cast<float>(g * h + b);
            }
        }

        const double unbias = count > 1 ? static_cast<double>(count) / (count - 1) : 1.0;
        running_mean.data[c] =
            static_cast<float>((1.0 - momentum) * running_mean.data[c] + momentum * mean);
        running_var.data[c] =
            static_cast<float>((1.0 - momentum) * running_var.data[c] + momentum * var * unbias);
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    require_shape(xhat_cache.size() == gy.size(), "batchnorm backward without cached forward");
    const size_t plane = static_cast<size_t>(gy.h) * gy.w;
    const double count = static_cast<double>(gy.n) * plane;

    Tensor gx(gy.n, gy.c, gy.h, gy.w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int in = 0; in < gy.n; ++in) {
            const float* g = gy.plane(in, c);
            const float* xh = xhat_cache.plane(in, c);
            for (size_t i = 0; i < plane; ++i) {
                sum_g += g[i];
                sum_gx += static_cast<double>(g[i]) * xh[i];
            }
        }
        ggamma.data[c] += static_cast<float>(sum_gx);
        gbeta.data[c] += static_cast<float>(sum_g);

        const double scale = gamma.data[c] * inv_std_cache[c] / count;
        for (int in = 0; in < gy.n; ++in) {
            const float* g = gy.plane(in, c);
            const float* xh = xhat_cache.plane(in, c);
            float* dst = gx.plane(in, c);
            for (size_t i = 0; i < plane; ++i)
                dst[i] = static_cast<float>(scale * (count * g[i] - sum_g - xh[i] * sum_gx));
        }
    }
    xhat_cache = Tensor{};
    return gx;
}

void BatchNorm2d::zero_grad() {
    std::fill(ggamma.data.begin(), ggamma.data.end(), 0.0f);
    std::fill(gbeta.data.begin(), gbeta.data.end(), 0.0f);
}

Tensor ReLU::forward(const Tensor& x, bool train) {
    Tensor y(x.n, x.c, x.h, x.w);
    if (train) mask_cache.assign(x.size(), 0);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(x.size()); ++i) {
        const bool pos = x.data[i] > 0.0f;
        y.data[i] = pos ? x.data[i] : 0.0f;
        if (train) mask_cache[i] = pos;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    require_shape(mask_cache.size() == gy.size(), "relu backward without cached forward");
    Tensor gx(gy.n, gy.c, gy.h, gy.w);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(gy.size()); ++i)
        gx.data[i] = mask_cache[i] ? gy.data[i] : 0.0f;
    mask_cache.clear();
    return gx;
}

Tensor MaxPool2x2::forward(const Tensor& x, bool train) {
    require_shape(x.h % 2 == 0 && x.w % 2 == 0, "maxpool needs even extents");
    Tensor y(x.n, x.c, x.h / 2, x.w / 2);
    const size_t oplane = static_cast<size_t>(y.h) * y.w;
    if (train) { // eval forward writes no member state (shared-model safety)
        in_h = x.h;
        in_w = x.w;
        argmax_cache.assign(y.size(), 0);
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.plane(in, c);
            float* dst = y.plane(in, c);
            uint8_t* am = train ? argmax_cache.data() +
                                      (static_cast<size_t>(in) * x.c + c) * oplane
                                : nullptr;
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) {
                    const size_t base = static_cast<size_t>(2 * yy) * x.w + 2 * xx;
                    const float v[4] = {src[base], src[base + 1], src[base + x.w],
                                        src[base + x.w + 1]};
                    int best = 0;
                    for (int j = 1; j < 4; ++j)
                        if (v[j] > v[best]) best = j; // ties keep the first
                    dst[static_cast<size_t>(yy) * y.w + xx] = v[best];
                    if (am) am[static_cast<size_t>(yy) * y.w + xx] = static_cast<uint8_t>(best);
                }
        }
    return y;
}

Tensor MaxPool2x2::backward(const Tensor& gy) {
    require_shape(argmax_cache.size() == gy.size(), "maxpool backward without cached forward");
    Tensor gx(gy.n, gy.c, in_h, in_w);
    const size_t oplane = static_cast<size_t>(gy.h) * gy.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < gy.n; ++in)
        for (int c = 0; c < gy.c; ++c) {
            const float* g = gy.plane(in, c);
            const uint8_t* am = argmax_cache.data() + (static_cast<size_t>(in) * gy.c + c) * oplane;
            float* dst = gx.plane(in, c);
            for (int yy = 0; yy < gy.h; ++yy)
                for (int xx = 0; xx < gy.w; ++xx) {
                    const int best = am[static_cast<size_t>(yy) * gy.w + xx];
                    const size_t base = static_cast<size_t>(2 * yy + best / 2) * in_w +
                                        (2 * xx + best % 2);
                    dst[base] = g[static_cast<size_t>(yy) * gy.w + xx];
                }
        }
    argmax_cache.clear();
    return gx;
}

Tensor UpsampleNearest2x::forward(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.plane(in, c);
            float* dst = y.plane(in, c);
            for (int yy = 0; yy < y.h; ++yy) {
                const float* row = src + static_cast<size_t>(yy / 2) * x.w;
                float* out_row = dst + static_cast<size_t>(yy) * y.w;
                for (int xx = 0; xx < y.w; ++xx) out_row[xx] = row[xx / 2];
            }
        }
    return y;
}

Tensor UpsampleNearest2x::backward(const Tensor& gy) {
    require_shape(gy.h % 2 == 0 && gy.w % 2 == 0, "upsample gradient needs even extents");
    Tensor gx(gy.n, gy.c, gy.h / 2, gy.w / 2);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < gy.n; ++in)
        for (int c = 0; c < gy.c; ++c) {
            const float* g = gy.plane(in, c);
            float* dst = gx.plane(in, c);
            for (int yy = 0; yy < gx.h; ++yy)
                for (int xx = 0; xx < gx.w; ++xx) {
                    const size_t base = static_cast<size_t>(2 * yy) * gy.w + 2 * xx;
                    dst[static_cast<size_t>(yy) * gx.w + xx] =
                        g[base] + g[base + 1] + g[base + gy.w] + g[base + gy.w + 1];
                }
        }
    return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_shape(a.n == b.n && a.h == b.h && a.w == b.w, "concat spatial shape mismatch");
    Tensor y(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        std::copy(a.plane(in, 0), a.plane(in, 0) + static_cast<size_t>(a.c) * plane,
                  y.plane(in, 0));
        std::copy(b.plane(in, 0), b.plane(in, 0) + static_cast<size_t>(b.c) * plane,
                  y.plane(in, a.c));
    }
    return y;
}

void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb) {
    const int c_b = g.c - c_a;
    ga = Tensor(g.n, c_a, g.h, g.w);
    gb = Tensor(g.n, c_b, g.h, g.w);
    const size_t plane = static_cast<size_t>(g.h) * g.w;
    for (int in = 0; in < g.n; ++in) {
        std::copy(g.plane(in, 0), g.plane(in, 0) + static_cast<size_t>(c_a) * plane,
                  ga.plane(in, 0));
        std::copy(g.plane(in, c_a), g.plane(in, c_a) + static_cast<size_t>(c_b) * plane,
                  gb.plane(in, 0));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add shape mismatch");
    Tensor y = a;
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
    return y;
}

} // namespace ir::nn
