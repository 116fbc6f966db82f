#include "ir/color.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ir::color {

namespace {
double det3(const std::array<double, 9>& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

double channel_mean(const Image& img, int c) {
    double acc = 0.0;
    for (float v : img.plane(c)) acc += v;
    return acc / static_cast<double>(img.pixel_count());
}

void require_rgb(const Image& img) {
    img.validate();
    if (img.channels != 3)
        throw std::invalid_argument("color pipeline requires a 3-channel image");
}
} // namespace

void ColorPipeline::validate() const {
    for (double g : wb_gains)
        if (!(g > 0.0) || !std::isfinite(g))
            throw std::invalid_argument("white-balance gains must be positive and finite");
    for (double v : raw_to_xyz)
        if (!std::isfinite(v))
            throw std::invalid_argument("color matrix must be finite");
    if (std::abs(det3(raw_to_xyz)) <= 1e-9)
        throw std::invalid_argument("color matrix is singular");
}

ColorPipeline estimate_wb_grayworld(const Image& img) {
    require_rgb(img);
    const double mr = channel_mean(img, 0);
    const double mg = channel_mean(img, 1);
    const double mb = channel_mean(img, 2);
    if (mr <= 1e-6 || mg <= 1e-6 || mb <= 1e-6)
        throw std::invalid_argument("degenerate illuminant: near-zero channel mean");
    ColorPipeline p;
    p.wb_gains = {mg / mr, 1.0, mg / mb};
    return p;
}

double channel_quantile(const Image& img, int channel, double q) {
    if (!(q > 0.0) || q > 1.0)
        throw std::invalid_argument("quantile must be in (0, 1]");
    auto plane = img.plane(channel);
    std::vector<float> v(plane.begin(), plane.end());
    const size_t idx = static_cast<size_t>(std::llround(q * (v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[idx];
}

ColorPipeline estimate_wb_whitepatch(const Image& img, double percentile) {
    require_rgb(img);
    const double qr = channel_quantile(img, 0, percentile);
    const double qg = channel_quantile(img, 1, percentile);
    const double qb = channel_quantile(img, 2, percentile);
    if (qr <= 1e-6 || qg <= 1e-6 || qb <= 1e-6)
        throw std::invalid_argument("degenerate illuminant: all-dark channel at quantile");
    ColorPipeline p;
    p.wb_gains = {qg / qr, 1.0, qg / qb};
    return p;
}

double srgb_encode_value(double v) {
    if (v <= 0.0031308) return 12.92 * v;
    return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

Image apply_pipeline(const Image& img, const ColorPipeline& p) {
    require_rgb(img);
    p.validate();

    Image out(img.width, img.height, 3);
    out.peak = img.peak;
    const float* r = img.plane(0).data();
    const float* g = img.plane(1).data();
    const float* b = img.plane(2).data();
    float* ro = out.plane(0).data();
    float* go = out.plane(1).data();
    float* bo = out.plane(2).data();
    const auto& m = p.raw_to_xyz;
    const auto& gains = p.wb_gains;

#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(img.pixel_count()); ++i) {
        const double vr = gains[0] * r[i];
        const double vg = gains[1] * g[i];
        const double vb = gains[2] * b[i];
        double xr = std::clamp(m[0] * vr + m[1] * vg + m[2] * vb, 0.0, 1.0);
        double xg = std::clamp(m[3] * vr + m[4] * vg + m[5] * vb, 0.0, 1.0);
        double xb = std::clamp(m[6] * vr + m[7] * vg + m[8] * vb, 0.0, 1.0);
        if (p.srgb_encode) {
            xr = srgb_encode_value(xr);
            xg = srgb_encode_value(xg);
            xb = srgb_encode_value(xb);
        }
        ro[i] = static_cast<float>(std::clamp(xr, 0.0, 1.0));
        go[i] = static_cast<float>(std::clamp(xg, 0.0, 1.0));
        bo[i] = static_cast<float>(std::clamp(xb, 0.0, 1.0));
    }
    return out;
}

std::array<double, 9> load_matrix(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument(path + ": cannot open matrix file");
    std::array<double, 9> m{};
    for (double& v : m)
        if (!(f >> v))
            throw std::invalid_argument(path + ": expected 9 whitespace-separated decimals");
    return m;
}

} // namespace ir::color
