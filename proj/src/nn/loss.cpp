#include "ir/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ir::nn {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (w_ssim < 0 || w_psnr < 0 || w_l2 < 0 || w_edge < 0)
        throw std::invalid_argument("loss weights must be >= 0");
    if (!(psnr_cap > 0.0)) throw std::invalid_argument("psnr cap must be > 0");
    if (base_width < 4) throw std::invalid_argument("base width must be >= 4");
}

namespace {

constexpr int kR = 5; // 11x11 SSIM window
constexpr int kWin = 2 * kR + 1;
constexpr double kC1 = 0.01 * 0.01; // peak = 1 in the normalized domain
constexpr double kC2 = 0.03 * 0.03;
constexpr double kMseFloor = 1e-10;
constexpr double kLn10 = 2.302585092994045684;

const double* window1d() {
    static const std::vector<double> g = [] {
        std::vector<double> v(kWin);
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - kR;
            v[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += v[i];
        }
        for (double& x : v) x /= sum;
        return v;
    }();
    return g.data();
}

struct PlaneBuf {
    std::vector<double> v;
    int h = 0, w = 0;
    void resize(int hh, int ww) {
        h = hh;
        w = ww;
        v.assign(static_cast<size_t>(hh) * ww, 0.0);
    }
    double* row(int y) { return v.data() + static_cast<size_t>(y) * w; }
    const double* row(int y) const { return v.data() + static_cast<size_t>(y) * w; }
};

void pad_reflect(const float* src, int h, int w, int r, PlaneBuf& out) {
    out.resize(h + 2 * r, w + 2 * r);
    for (int y = 0; y < out.h; ++y) {
        const int sy = reflect101(y - r, h);
        double* dst = out.row(y);
        const float* s = src + static_cast<size_t>(sy) * w;
        for (int x = 0; x < out.w; ++x) dst[x] = s[reflect101(x - r, w)];
    }
}

// valid separable correlation with the SSIM window: (h+2R, w+2R) -> (h, w)
void win_valid(const PlaneBuf& in, PlaneBuf& tmp, PlaneBuf& out) {
    const double* g = window1d();
    const int w = in.w - 2 * kR;
    const int h = in.h - 2 * kR;
    tmp.resize(in.h, w);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < in.h; ++y) {
        const double* s = in.row(y);
        double* d = tmp.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[k] * s[x + k];
            d[x] = acc;
        }
    }
    out.resize(h, w);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double* d = out.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[k] * tmp.row(y + k)[x];
            d[x] = acc;
        }
    }
}

// adjoint of win_valid: (h, w) -> (h+2R, w+2R), zero outside the valid range
void win_adjoint(const PlaneBuf& in, PlaneBuf& tmp, PlaneBuf& out) {
    const double* g = window1d();
    const int h = in.h, w = in.w;
    tmp.resize(h + 2 * kR, w); // expand rows first (transpose of the y pass)
#pragma omp parallel for schedule(static)
    for (int y = 0; y < tmp.h; ++y) {
        double* d = tmp.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) {
                const int sy = y - k;
                if (sy >= 0 && sy < h) acc += g[k] * in.row(sy)[x];
            }
            d[x] = acc;
        }
    }
    out.resize(h + 2 * kR, w + 2 * kR);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out.h; ++y) {
        double* d = out.row(y);
        const double* s = tmp.row(y);
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) {
                const int sx = x - k;
                if (sx >= 0 && sx < w) acc += g[k] * s[sx];
            }
            d[x] = acc;
        }
    }
}

// scatter a padded-plane gradient back through the reflect-101 pad
void fold_pad(const PlaneBuf& gpad, int h, int w, int r, float* grad, double scale) {
    for (int y = 0; y < gpad.h; ++y) {
        const int sy = reflect101(y - r, h);
        const double* s = gpad.row(y);
        for (int x = 0; x < gpad.w; ++x)
            grad[static_cast<size_t>(sy) * w + reflect101(x - r, w)] +=
                static_cast<float>(scale * s[x]);
    }
}

struct SsimWork {
    PlaneBuf pa, pb, tmp, tmp2, prod;
    PlaneBuf ma, mb, saa, sbb, sab;
    PlaneBuf gm1, gsaa, gsab;
    PlaneBuf adj, acc;
};

// SSIM of one plane pair; optionally accumulates upstream * dSSIM/da into
// grad_a. a is the prediction, b the target.
double ssim_plane(const float* a, const float* b, int h, int w, float* grad_a,
                  double upstream, SsimWork& wk) {
    pad_reflect(a, h, w, kR, wk.pa);
    pad_reflect(b, h, w, kR, wk.pb);
    win_valid(wk.pa, wk.tmp, wk.ma);
    win_valid(wk.pb, wk.tmp, wk.mb);

    wk.prod.resize(wk.pa.h, wk.pa.w);
    for (size_t i = 0; i < wk.prod.v.size(); ++i) wk.prod.v[i] = wk.pa.v[i] * wk.pa.v[i];
    win_valid(wk.prod, wk.tmp, wk.saa);
    for (size_t i = 0; i < wk.prod.v.size(); ++i) wk.prod.v[i] = wk.pb.v[i] * wk.pb.v[i];
    win_valid(wk.prod, wk.tmp, wk.sbb);
    for (size_t i = 0; i < wk.prod.v.size(); ++i) wk.prod.v[i] = wk.pa.v[i] * wk.pb.v[i];
    win_valid(wk.prod, wk.tmp, wk.sab);

    const bool want_grad = grad_a != nullptr;
    if (want_grad) {
        wk.gm1.resize(h, w);
        wk.gsaa.resize(h, w);
        wk.gsab.resize(h, w);
    }

    // SSIM = A1*A2 / (B1*B2) with raw weighted moments m1, m2, Saa, Sbb, Sab:
    //   A1 = 2*m1*m2 + C1            B1 = m1^2 + m2^2 + C1
    //   A2 = 2*(Sab - m1*m2) + C2    B2 = (Saa - m1^2) + (Sbb - m2^2) + C2
    std::vector<double> rowsum(h, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double acc = 0.0;
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const double m1 = wk.ma.v[i], m2 = wk.mb.v[i];
            const double a1 = 2.0 * m1 * m2 + kC1;
            const double a2 = 2.0 * (wk.sab.v[i] - m1 * m2) + kC2;
            const double b1 = m1 * m1 + m2 * m2 + kC1;
            const double b2 = (wk.saa.v[i] - m1 * m1) + (wk.sbb.v[i] - m2 * m2) + kC2;
            const double den = b1 * b2;
            const double val = a1 * a2 / den;
            acc += val;
            if (want_grad) {
                // quotient rule against the raw moments
                const double da1 = 2.0 * m2;      // dA1/dm1
                const double da2 = -2.0 * m2;     // dA2/dm1
                const double db1 = 2.0 * m1;      // dB1/dm1
                const double db2 = -2.0 * m1;     // dB2/dm1
                wk.gm1.v[i] = ((da1 * a2 + a1 * da2) * den -
                               a1 * a2 * (db1 * b2 + b1 * db2)) /
                              (den * den);
                wk.gsaa.v[i] = -val / b2;        // dB2/dSaa = 1
                wk.gsab.v[i] = 2.0 * a1 / den;   // dA2/dSab = 2
            }
        }
        rowsum[y] = acc;
    }
    double total = 0.0;
    for (double v : rowsum) total += v;
    const double npix = static_cast<double>(h) * w;

    if (want_grad) {
        // d(mean map)/da = adjoint of the moment filters; each map entry
        // carries 1/npix from the mean
        const double s = upstream / npix;
        wk.acc.resize(wk.pa.h, wk.pa.w);
        std::fill(wk.acc.v.begin(), wk.acc.v.end(), 0.0);

        win_adjoint(wk.gm1, wk.tmp2, wk.adj);
        for (size_t i = 0; i < wk.acc.v.size(); ++i) wk.acc.v[i] += wk.adj.v[i];
        win_adjoint(wk.gsaa, wk.tmp2, wk.adj);
        for (size_t i = 0; i < wk.acc.v.size(); ++i)
            wk.acc.v[i] += 2.0 * wk.pa.v[i] * wk.adj.v[i];
        win_adjoint(wk.gsab, wk.tmp2, wk.adj);
        for (size_t i = 0; i < wk.acc.v.size(); ++i)
            wk.acc.v[i] += wk.pb.v[i] * wk.adj.v[i];

        fold_pad(wk.acc, h, w, kR, grad_a, s);
    }
    return total / npix;
}

void require_pair(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("loss shape mismatch: pred " + pred.shape_str() +
                                    " vs target " + target.shape_str());
    if (std::min(pred.h, pred.w) < kWin)
        throw std::invalid_argument("loss requires spatial extent >= 11 for SSIM");
}

// --- Sobel edge term ------------------------------------------------------

constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
constexpr double kEdgeEps = 1e-12;

struct EdgeWork {
    PlaneBuf pa, pb;
    PlaneBuf gxa, gya, gxb, gyb;
    PlaneBuf dmagx, dmagy, gpad;
};

void sobel_valid(const PlaneBuf& in, PlaneBuf& gx, PlaneBuf& gy) {
    const int h = in.h - 2, w = in.w - 2;
    gx.resize(h, w);
    gy.resize(h, w);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double ax = 0.0, ay = 0.0;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const double v = in.row(y + ky)[x + kx];
                    ax += kSobelX[ky][kx] * v;
                    ay += kSobelY[ky][kx] * v;
                }
            gx.row(y)[x] = ax;
            gy.row(y)[x] = ay;
        }
}

// edge term for one plane pair with optional gradient w.r.t. a
double edge_plane(const float* a, const float* b, int h, int w, float* grad_a,
                  double upstream, EdgeWork& wk) {
    pad_reflect(a, h, w, 1, wk.pa);
    pad_reflect(b, h, w, 1, wk.pb);
    sobel_valid(wk.pa, wk.gxa, wk.gya);
    sobel_valid(wk.pb, wk.gxb, wk.gyb);

    const bool want_grad = grad_a != nullptr;
    if (want_grad) {
        wk.dmagx.resize(h, w);
        wk.dmagy.resize(h, w);
    }
    const double npix = static_cast<double>(h) * w;
    double total = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const double sa = std::sqrt(wk.gxa.v[i] * wk.gxa.v[i] +
                                        wk.gya.v[i] * wk.gya.v[i] + kEdgeEps);
            const double sb = std::sqrt(wk.gxb.v[i] * wk.gxb.v[i] +
                                        wk.gyb.v[i] * wk.gyb.v[i] + kEdgeEps);
            total += std::abs(sa - sb);
            if (want_grad) {
                const double sgn = sa >= sb ? 1.0 : -1.0;
                wk.dmagx.v[i] = sgn * wk.gxa.v[i] / sa;
                wk.dmagy.v[i] = sgn * wk.gya.v[i] / sa;
            }
        }

    if (want_grad) {
        // adjoint of the valid Sobel correlation into the padded plane,
        // then fold through the reflect pad
        wk.gpad.resize(h + 2, w + 2);
        std::fill(wk.gpad.v.begin(), wk.gpad.v.end(), 0.0);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < wk.gpad.h; ++y)
            for (int x = 0; x < wk.gpad.w; ++x) {
                double acc = 0.0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sy = y - ky, sx = x - kx;
                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                        const size_t i = static_cast<size_t>(sy) * w + sx;
                        acc += kSobelX[ky][kx] * wk.dmagx.v[i] +
                               kSobelY[ky][kx] * wk.dmagy.v[i];
                    }
                wk.gpad.row(y)[x] = acc;
            }
        fold_pad(wk.gpad, h, w, 1, grad_a, upstream / npix);
    }
    return total / npix;
}

} // namespace

double tensor_mse(const Tensor& pred, const Tensor& target, int item) {
    const size_t per = static_cast<size_t>(pred.c) * pred.h * pred.w;
    const float* a = pred.data.data() + item * per;
    const float* b = target.data.data() + item * per;
    double acc = 0.0;
    for (size_t i = 0; i < per; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(per);
}

LossTerms loss_total(const Tensor& pred, const Tensor& target, const TrainConfig& cfg,
                     Tensor* grad) {
    require_pair(pred, target);
    cfg.validate();

    const int B = pred.n;
    const size_t per = static_cast<size_t>(pred.c) * pred.h * pred.w;
    if (grad) {
        *grad = Tensor(pred.n, pred.c, pred.h, pred.w);
    }

    LossTerms out;
    SsimWork wk;
    for (int i = 0; i < B; ++i) {
        // SSIM averaged over channels
        double ssim_i = 0.0;
        for (int c = 0; c < pred.c; ++c) {
            float* gplane = grad ? grad->plane(i, c) : nullptr;
            const double upstream = -cfg.w_ssim / (static_cast<double>(B) * pred.c);
            ssim_i += ssim_plane(pred.plane(i, c), target.plane(i, c), pred.h, pred.w,
                                 gplane, upstream, wk);
        }
        ssim_i /= pred.c;

        const double mse_i = tensor_mse(pred, target, i);
        const double mse_c = std::max(mse_i, kMseFloor);
        const double psnr_i = 10.0 * std::log10(1.0 / mse_c); // peak = 1
        const double psnr_term = 1.0 - std::min(psnr_i, cfg.psnr_cap) / cfg.psnr_cap;

        out.ssim_term += cfg.w_ssim * (1.0 - ssim_i) / B;
        out.psnr_term += cfg.w_psnr * psnr_term / B;
        out.l2_term += cfg.w_l2 * mse_i / B;

        if (grad) {
            // both the PSNR and L2 terms reach pred through dMSE/dpred
            double dmse = cfg.w_l2;
            if (psnr_i < cfg.psnr_cap && mse_i > kMseFloor)
                dmse += cfg.w_psnr * 10.0 / (cfg.psnr_cap * kLn10 * mse_c);
            const double scale = dmse * 2.0 / (static_cast<double>(per) * B);
            const float* a = pred.data.data() + i * per;
            const float* b = target.data.data() + i * per;
            float* g = grad->data.data() + i * per;
            for (size_t j = 0; j < per; ++j)
                g[j] += static_cast<float>(scale * (static_cast<double>(a[j]) - b[j]));
        }
    }
    out.total = out.ssim_term + out.psnr_term + out.l2_term;
    return out;
}

LossTerms loss_fine(const Tensor& pred, const Tensor& target, const TrainConfig& cfg,
                    Tensor* grad) {
    require_pair(pred, target);
    cfg.validate();

    const int B = pred.n;
    if (grad) *grad = Tensor(pred.n, pred.c, pred.h, pred.w);

    LossTerms out;
    SsimWork swk;
    EdgeWork ewk;
    for (int i = 0; i < B; ++i) {
        double ssim_i = 0.0, edge_i = 0.0;
        for (int c = 0; c < pred.c; ++c) {
            float* gplane = grad ? grad->plane(i, c) : nullptr;
            ssim_i += ssim_plane(pred.plane(i, c), target.plane(i, c), pred.h, pred.w,
                                 gplane, -cfg.w_ssim / (static_cast<double>(B) * pred.c), swk);
            edge_i += edge_plane(pred.plane(i, c), target.plane(i, c), pred.h, pred.w,
                                 gplane, cfg.w_edge / (static_cast<double>(B) * pred.c), ewk);
        }
        ssim_i /= pred.c;
        edge_i /= pred.c;
        out.ssim_term += cfg.w_ssim * (1.0 - ssim_i) / B;
        out.edge_term += cfg.w_edge * edge_i / B;
    }
    out.total = out.ssim_term + out.edge_term;
    return out;
}

} // namespace ir::nn
