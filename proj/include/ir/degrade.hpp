#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ir/image.hpp"

namespace ir::degrade {

// Noise sigmas are expressed in 8-bit units (sigma/255 in the normalized
// domain) so the usual sigma = 10..60 grids stay literal.
struct NoiseSpec {
    enum class Kind { awgn, speckle, salt_pepper, poisson };
    Kind kind = Kind::awgn;
    double sigma = 0.0;  // awgn: 8-bit std-dev; speckle: multiplicative std-dev
    double p = 0.0;      // salt_pepper corruption probability
    double peak = 0.0;   // poisson events at sample value 1.0
};

struct BlurSpec {
    enum class Kind { motion, disk };
    Kind kind = Kind::motion;
    double length = 1.0; // motion, pixels
    double angle = 0.0;  // motion, degrees
    double radius = 0.0; // disk, pixels
};

using Step = std::variant<BlurSpec, NoiseSpec>;

// Ordered degradation steps. Each step draws from its own stream derived
// from (master_seed, step index), so inserting a step never shifts another
// step's randomness.
struct DegradationRecipe {
    std::vector<Step> steps;
    uint64_t master_seed = 0;

    static DegradationRecipe blur_noise(const BlurSpec& blur, const NoiseSpec& noise,
                                        uint64_t seed) {
        DegradationRecipe r;
        r.steps = {blur, noise};
        r.master_seed = seed;
        return r;
    }
};

Image add_awgn(const Image& img, double sigma8, uint64_t seed);
Image add_speckle(const Image& img, double sigma, uint64_t seed);
// With probability p a pixel is forced to 0 or 1 (even split), jointly
// across its channels.
Image add_salt_pepper(const Image& img, double p, uint64_t seed);
// out = Poisson(v * peak) / peak per sample, clamped.
Image add_poisson(const Image& img, double peak, uint64_t seed);

// Anti-aliased line segment through the kernel center, bilinear splats at
// unit spacing, normalized to sum 1. Angle in degrees, counter-clockwise
// from the +x axis. length = 1 gives the identity kernel.
Kernel2D motion_kernel(double length, double angle_deg);

// Pillbox: per-tap coverage of the disk of the given radius, supersampled,
// normalized to sum 1. radius = 0 gives the identity kernel.
Kernel2D disk_kernel(double radius);

Kernel2D make_kernel(const BlurSpec& spec);

Image apply_step(const Image& img, const Step& step, uint64_t seed);
Image apply_recipe(const Image& img, const DegradationRecipe& r);

// One-line JSON: {"master_seed":N,"steps":[{"kind":...},...]}
std::string recipe_to_json(const DegradationRecipe& r);
DegradationRecipe recipe_from_json(const std::string& json);

} // namespace ir::degrade
