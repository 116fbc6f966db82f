#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ir/bench.hpp"
#include "ir/classical.hpp"
#include "ir/degrade.hpp"
#include "ir/metrics.hpp"
#include "ir/rng.hpp"

using namespace ir;
using namespace ir::classical;

namespace {

Image random_image(int w, int h, int c, uint64_t seed) {
    Image img(w, h, c);
    Rng rng(seed);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

Image step_image(int size, float lo, float hi) {
    Image img(size, size, 1, lo);
    for (int y = 0; y < size; ++y)
        for (int x = size / 2; x < size; ++x) img.at(0, y, x) = hi;
    return img;
}

double plane_std(const Image& img, int x0, int x1) {
    double sum = 0, sq = 0;
    size_t n = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = x0; x < x1; ++x) {
            const double v = img.at(0, y, x);
            sum += v;
            sq += v * v;
            ++n;
        }
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sq / n - mean * mean));
}

} // namespace

TEST_CASE("every denoiser fixes constant images") {
    const Image c(32, 32, 3, 0.42f);
    auto check_const = [&](const Image& out) {
        for (float v : out.data) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
    };
    check_const(gaussian_denoise(c, 1.5));
    check_const(bilateral_denoise(c, 2.0, 0.1));
    check_const(nlm_denoise(c, 1, 3, 0.1));
    check_const(anisotropic_diffuse(c, 10, 0.1, 0.2));
    check_const(tv_denoise(c, 10.0, 50));
}

TEST_CASE("gaussian impulse response samples the normalized kernel") {
    Image img(21, 21, 1);
    img.at(0, 10, 10) = 1.0f;
    const double sigma = 1.2;
    const Image out = gaussian_denoise(img, sigma);

    const int r = static_cast<int>(std::ceil(3 * sigma));
    double norm = 0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) norm += std::exp(-(x * x + y * y) / (2 * sigma * sigma));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            CHECK(out.at(0, 10 + dy, 10 + dx) ==
                  doctest::Approx(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / norm)
                      .epsilon(1e-6));
}

TEST_CASE("denoisers improve a noisy smooth scene") {
    const Image clean = bench::synth_scene(96, 5);
    const Image noisy = degrade::add_awgn(clean, 10.0, 3);
    const double base = metrics::psnr(noisy, clean);
    CHECK(metrics::psnr(gaussian_denoise(noisy, 0.8), clean) > base);
    CHECK(metrics::psnr(nlm_denoise(degrade::add_awgn(clean, 20.0, 4), 1, 5, 0.12), clean) >
          metrics::psnr(degrade::add_awgn(clean, 20.0, 4), clean));
}

TEST_CASE("bilateral with saturated range matches gaussian") {
    const Image img = random_image(24, 24, 1, 8);
    const double sigma_s = 1.5;
    const Image a = bilateral_denoise(img, sigma_s, 1e6);
    const Image b = gaussian_denoise(img, sigma_s);
    for (size_t i = 0; i < a.data.size(); ++i)
        CHECK(std::abs(a.data[i] - b.data[i]) < 1e-4);
}

TEST_CASE("bilateral preserves a strong edge") {
    const Image img = step_image(32, 0.0f, 1.0f);
    const Image out = bilateral_denoise(img, 2.0, 0.05);
    const int e = 16;
    const double contrast = out.at(0, 16, e) - out.at(0, 16, e - 1);
    CHECK(contrast >= 0.9);
}

TEST_CASE("nlm with vanishing strength returns the input") {
    // A diagonal ramp makes every candidate patch structurally distinct, so
    // d^2 clears the 2*sigma_est^2 offset and all weights vanish as h -> 0.
    Image ramp(24, 24, 1);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            ramp.at(0, y, x) = static_cast<float>(0.05 + 0.03 * (x + 0.37 * y));
    const Image noisy = degrade::add_awgn(ramp, 0.5, 5);
    const Image out = nlm_denoise(noisy, 1, 3, 1e-6);
    // interior only: reflect-101 mirrors the ramp at the borders, which
    // creates genuinely similar patches that NLM rightly averages
    for (int y = 4; y < 20; ++y)
        for (int x = 4; x < 20; ++x)
            CHECK(std::abs(out.at(0, y, x) - noisy.at(0, y, x)) < 1e-3);
}

TEST_CASE("nlm rejects windows larger than the image") {
    CHECK_THROWS_AS(nlm_denoise(random_image(8, 8, 1, 1), 2, 3, 0.1), std::invalid_argument);
}

TEST_CASE("anisotropic diffusion conserves the mean") {
    const Image img = random_image(32, 32, 1, 10);
    double prev_mean = 0;
    for (float v : img.data) prev_mean += v;
    prev_mean /= img.data.size();

    const Image out = anisotropic_diffuse(img, 100, 0.1, 0.2);
    double mean = 0;
    for (float v : out.data) mean += v;
    mean /= out.data.size();
    CHECK(std::abs(mean - prev_mean) <= 100 * 1e-6);
}

TEST_CASE("anisotropic diffusion keeps a sharp step with small K") {
    const Image img = step_image(32, 0.2f, 0.8f);
    const Image out = anisotropic_diffuse(img, 10, 0.06, 0.2); // K = 0.1 x step height
    const double contrast = out.at(0, 16, 16) - out.at(0, 16, 15);
    CHECK(contrast >= 0.95 * 0.6);
}

TEST_CASE("anisotropic rejects unstable steps") {
    CHECK_THROWS_AS(anisotropic_diffuse(random_image(8, 8, 1, 1), 1, 0.1, 0.3),
                    std::invalid_argument);
}

TEST_CASE("tv with huge lambda returns the input") {
    const Image img = random_image(24, 24, 3, 11);
    const Image out = tv_denoise(img, 1e6, 30);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(out.data[i] - img.data[i]) < 1e-3);
}

TEST_CASE("tv flattens a noisy extruded step") {
    Image img = step_image(64, 0.25f, 0.75f);
    const Image noisy = degrade::add_awgn(img, 12.0, 6);
    const double noise_std = 12.0 / 255.0;
    const Image out = tv_denoise(noisy, 8.0, 200);
    // interior of each region, away from the jump
    CHECK(plane_std(out, 4, 26) <= 0.2 * noise_std);
    CHECK(plane_std(out, 38, 60) <= 0.2 * noise_std);
    // the step survives
    CHECK(out.at(0, 32, 40) - out.at(0, 32, 20) > 0.3);
}

TEST_CASE("richardson-lucy: identity kernel is a fixed point") {
    const Image img = random_image(24, 24, 1, 12);
    const Image out = richardson_lucy(img, Kernel2D::identity(), 5);
    CHECK(out.data == img.data);
}

TEST_CASE("richardson-lucy recovers a known motion blur") {
    const Image clean = bench::synth_scene(96, 21);
    const Kernel2D k = degrade::motion_kernel(9, 0);
    const Image blurred = clamp01(convolve(clean, k));
    const Image restored = richardson_lucy(blurred, k, 30);
    CHECK(metrics::psnr(restored, clean) >= metrics::psnr(blurred, clean) + 3.0);
}

TEST_CASE("richardson-lucy outputs stay non-negative") {
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        const Image img = random_image(16, 16, 1, 600 + i);
        const Kernel2D k = i % 2 ? degrade::motion_kernel(1 + rng.uniform() * 5, rng.uniform() * 180)
                                 : degrade::disk_kernel(rng.uniform() * 2);
        const Image out = richardson_lucy(img, k, 3);
        for (float v : out.data) CHECK(v >= 0.0f);
    }
}

TEST_CASE("richardson-lucy validates the kernel") {
    Kernel2D bad(3, 3, 0.2); // sums to 1.8
    CHECK_THROWS_AS(richardson_lucy(random_image(8, 8, 1, 1), bad, 1), std::invalid_argument);
}

TEST_CASE("wiener: identity kernel with zero nsr is the identity") {
    const Image img = random_image(24, 24, 3, 13);
    const Image out = wiener_deconvolve(img, Kernel2D::identity(), 0.0);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(out.data[i] - img.data[i]) < 1e-6);
}

TEST_CASE("wiener DC gain equals 1/(1+nsr)") {
    Image flat(32, 32, 1, 0.8f);
    const Kernel2D k = degrade::motion_kernel(5, 0);
    const double nsr = 0.5;
    const Image out = wiener_deconvolve(flat, k, nsr);
    for (float v : out.data) CHECK(v == doctest::Approx(0.8 / (1.0 + nsr)).epsilon(1e-5));
}

TEST_CASE("wiener recovers a known motion blur") {
    const Image clean = bench::synth_scene(96, 22);
    const Kernel2D k = degrade::motion_kernel(9, 0);
    const Image blurred = clamp01(convolve(clean, k));
    const Image restored = wiener_deconvolve(blurred, k, 1e-6);
    CHECK(metrics::psnr(restored, clean) >= metrics::psnr(blurred, clean) + 5.0);
}

TEST_CASE("restore dispatch and parameter overrides") {
    const Image img = random_image(24, 24, 3, 14);
    RestoreConfig cfg;
    cfg.method = "identity";
    CHECK(restore(img, cfg, nullptr).data == img.data);

    cfg.method = "gaussian";
    cfg.params["sigma"] = 1.0;
    CHECK(restore(img, cfg, nullptr).data == gaussian_denoise(img, 1.0).data);

    cfg.method = "does-not-exist";
    CHECK_THROWS_AS(restore(img, cfg, nullptr), std::invalid_argument);
}
