#pragma once

#include <map>
#include <string>

#include "ir/image.hpp"

namespace ir::classical {

// Gaussian smoothing: normalized 2-D kernel truncated at +/-3 sigma.
Image gaussian_denoise(const Image& img, double sigma);

// Spatial x range Gaussian weighting over a +/-3 sigma_s window, per channel.
Image bilateral_denoise(const Image& img, double sigma_s, double sigma_r);

// Non-local means: patch distances over a search window, weights
// exp(-max(d^2 - 2*sigma_est^2, 0)/h^2), self-weight = max neighbor weight.
// sigma_est is a per-channel MAD estimate of the noise level from the
// Laplacian residual.
Image nlm_denoise(const Image& img, int patch_radius, int search_radius, double h);

// Perona-Malik explicit scheme, conductance exp(-(grad/K)^2), 4-neighbor
// fluxes, Neumann boundaries. dt must lie in (0, 0.25] for stability.
Image anisotropic_diffuse(const Image& img, int iterations, double K, double dt);

// Rudin-Osher-Fatemi model (lambda/2)||u-f||^2 + TV(u), solved with
// Chambolle's dual projection. Large lambda returns the input.
Image tv_denoise(const Image& img, double lambda, int iterations);

// Multiplicative Richardson-Lucy updates with reflect borders and a 1e-8
// division floor. Kernel must be normalized; output stays >= 0.
Image richardson_lucy(const Image& img, const Kernel2D& k, int iterations);

// Frequency-domain H*/(|H|^2 + nsr) per channel. The image is edge-tapered
// toward its kernel-blurred version before the periodic FFT.
Image wiener_deconvolve(const Image& img, const Kernel2D& k, double nsr);

// per-channel robust noise std estimate (MAD of the Laplacian residual)
double estimate_noise_sigma(const Image& img, int channel);

// CLI-facing dispatch: method name + key=value parameters. Unknown method
// or parameter throws std::invalid_argument. The blur kernel, when a method
// needs one, is the benchmark cell's kernel.
struct RestoreConfig {
    std::string method;
    std::map<std::string, double> params;
};

Image restore(const Image& img, const RestoreConfig& cfg, const Kernel2D* blur_kernel);

} // namespace ir::classical
