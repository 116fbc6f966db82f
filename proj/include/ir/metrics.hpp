#pragma once

#include <string>

#include "ir/image.hpp"

namespace ir::metrics {

// Per-image quality scores. psnr may be +infinity (identical images); the
// CSV writer emits the string "inf" for that case.
struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
    double edge_loss = 0.0;
};

// Mean squared difference over all width x height x channels samples.
double mse(const Image& a, const Image& b);

// 10*log10(peak^2/mse); +infinity when mse == 0.
double psnr(const Image& a, const Image& b, double peak);
double psnr(const Image& a, const Image& b); // peak taken from a
double psnr_from_mse(double mse, double peak);

// Mean of the local SSIM map: 11x11 Gaussian window (sigma 1.5),
// C1=(0.01*peak)^2, C2=(0.03*peak)^2, reflect-101 borders, channels averaged
// flat. Requires min(width, height) >= 11.
double ssim(const Image& a, const Image& b);

// mean(|sobel_magnitude(a) - sobel_magnitude(b)|)
double edge_loss(const Image& a, const Image& b);

MetricReport evaluate(const Image& result, const Image& reference);

// "inf" for +infinity, else fixed 6-decimal formatting (stable CSV bytes).
std::string format_metric(double v);

} // namespace ir::metrics
