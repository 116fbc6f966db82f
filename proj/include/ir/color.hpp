#pragma once

#include <array>
#include <string>

#include "ir/image.hpp"

namespace ir::color {

// Raw -> sRGB rendering chain: per-channel white-balance gains (green
// normalized to 1), a 3x3 raw->XYZ-style matrix (identity unless a camera
// profile is loaded), and an optional sRGB transfer curve on the way out.
struct ColorPipeline {
    std::array<double, 3> wb_gains{1.0, 1.0, 1.0};
    std::array<double, 9> raw_to_xyz{1, 0, 0, 0, 1, 0, 0, 0, 1}; // row-major
    bool srgb_encode = false;

    void validate() const;
};

// Gray-world gains: (mean_g/mean_r, 1, mean_g/mean_b).
ColorPipeline estimate_wb_grayworld(const Image& img);

// White-patch gains from per-channel quantiles at the given percentile
// (1.0 = channel maximum), normalized to the green quantile.
ColorPipeline estimate_wb_whitepatch(const Image& img, double percentile);

// quantile q of one channel, q in (0,1]; index round(q*(n-1)) of the sorted
// samples
double channel_quantile(const Image& img, int channel, double q);

// v <- clamp(M * (gains .* v), 0, 1), then the sRGB curve if enabled.
Image apply_pipeline(const Image& img, const ColorPipeline& p);

// standard sRGB transfer: 12.92*v below 0.0031308, else 1.055*v^(1/2.4)-0.055
double srgb_encode_value(double linear);

// 9 whitespace-separated decimals, row-major.
std::array<double, 9> load_matrix(const std::string& path);

} // namespace ir::color
