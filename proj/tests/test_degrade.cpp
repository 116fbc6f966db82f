#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ir/degrade.hpp"
#include "ir/rng.hpp"

using namespace ir;
using namespace ir::degrade;

namespace {

std::pair<double, double> sample_moments(const Image& img) {
    double sum = 0, sq = 0;
    for (float v : img.data) {
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(img.data.size());
    const double mean = sum / n;
    return {mean, std::sqrt(std::max(0.0, sq / n - mean * mean))};
}

Image random_image(int w, int h, int c, uint64_t seed) {
    Image img(w, h, c);
    Rng rng(seed);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

} // namespace

TEST_CASE("awgn: zero sigma is the identity") {
    const Image img = random_image(16, 16, 3, 1);
    CHECK(add_awgn(img, 0.0, 42).data == img.data);
    CHECK_THROWS_AS(add_awgn(img, -1.0, 0), std::invalid_argument);
}

TEST_CASE("awgn sigma 25 empirical moments on 65536 samples") {
    Image img(256, 256, 1, 0.5f);
    const Image noisy = add_awgn(img, 25.0, 7);
    const auto [mean, std] = sample_moments(noisy);
    const double sigma = 25.0 / 255.0;
    CHECK(std::abs(std - sigma) / sigma < 0.02);
    CHECK(std::abs(mean - 0.5) < 0.002);
}

TEST_CASE("awgn accepts the benchmark sigma grid") {
    Image img(32, 32, 1, 0.5f);
    for (double sigma : {10.0, 20.0, 30.0, 40.0, 50.0, 60.0})
        CHECK_NOTHROW(add_awgn(img, sigma, 1));
}

TEST_CASE("speckle basics and moments") {
    const Image img = random_image(16, 16, 1, 2);
    CHECK(add_speckle(img, 0.0, 5).data == img.data);

    Image zeros(64, 64, 1, 0.0f);
    for (float v : add_speckle(zeros, 0.8, 5).data) CHECK(v == 0.0f);

    Image half(256, 256, 1, 0.5f);
    const auto [mean, std] = sample_moments(add_speckle(half, 0.1, 9));
    CHECK(std::abs(std - 0.05) / 0.05 < 0.03);
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("salt-pepper corruption statistics") {
    const Image img = random_image(16, 16, 3, 3);
    CHECK(add_salt_pepper(img, 0.0, 1).data == img.data);

    Image mid(256, 256, 1, 0.5f);
    const Image all = add_salt_pepper(mid, 1.0, 2);
    for (float v : all.data) CHECK((v == 0.0f || v == 1.0f));

    const Image some = add_salt_pepper(mid, 0.05, 3);
    size_t salt = 0, pepper = 0;
    for (float v : some.data) {
        salt += v == 1.0f;
        pepper += v == 0.0f;
    }
    const double n = static_cast<double>(some.data.size());
    CHECK(std::abs((salt + pepper) / n - 0.05) < 0.005);
    CHECK(std::abs(static_cast<double>(salt) / n - 0.025) < 0.005);
    CHECK(std::abs(static_cast<double>(pepper) / n - 0.025) < 0.005);

    CHECK_THROWS_AS(add_salt_pepper(mid, 1.5, 0), std::invalid_argument);
}

TEST_CASE("salt-pepper corrupts pixels jointly across channels") {
    Image mid(64, 64, 3, 0.5f);
    const Image out = add_salt_pepper(mid, 0.3, 11);
    for (size_t p = 0; p < out.pixel_count(); ++p) {
        const float r = out.data[p];
        const float g = out.data[out.pixel_count() + p];
        const float b = out.data[2 * out.pixel_count() + p];
        CHECK(r == g);
        CHECK(g == b);
    }
}

TEST_CASE("poisson basics and moments") {
    Image zeros(32, 32, 1, 0.0f);
    for (float v : add_poisson(zeros, 100.0, 4).data) CHECK(v == 0.0f);

    Image half(256, 256, 1, 0.5f);
    const Image noisy = add_poisson(half, 1000.0, 5);
    const auto [mean, std] = sample_moments(noisy);
    CHECK(std::abs(mean - 0.5) / 0.5 < 0.01);
    const double expected_var = 0.5 / 1000.0;
    CHECK(std::abs(std * std - expected_var) / expected_var < 0.10);

    CHECK_THROWS_AS(add_poisson(half, 0.0, 0), std::invalid_argument);
}

TEST_CASE("poisson converges to the identity at huge peaks") {
    const Image img = random_image(64, 64, 3, 6);
    const Image out = add_poisson(img, 1e9, 7);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(out.data[i] - img.data[i]) < 1e-3);
}

TEST_CASE("motion kernel: degenerate and axis-aligned cases") {
    const Kernel2D k1 = motion_kernel(1.0, 123.0);
    CHECK(k1.width == 1);
    CHECK(k1.height == 1);
    CHECK(k1.weights[0] == 1.0);

    const Kernel2D k3 = motion_kernel(3.0, 0.0);
    CHECK(k3.height == 1);
    CHECK(k3.width == 3);
    for (double w : k3.weights) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-12));

    CHECK_THROWS_AS(motion_kernel(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("motion kernel: sum and rotational symmetry") {
    const Kernel2D k = motion_kernel(9.0, 37.0);
    CHECK(std::abs(k.sum() - 1.0) < 1e-6);
    const Kernel2D f = k.flipped();
    for (size_t i = 0; i < k.weights.size(); ++i)
        CHECK(std::abs(k.weights[i] - f.weights[i]) < 1e-6);
}

TEST_CASE("disk kernel: identity, support, symmetry") {
    const Kernel2D k0 = disk_kernel(0.0);
    CHECK(k0.width == 1);
    CHECK(k0.weights[0] == 1.0);

    const Kernel2D k2 = disk_kernel(2.0);
    CHECK(k2.width == 5);
    CHECK(k2.height == 5);
    CHECK(std::abs(k2.sum() - 1.0) < 1e-6);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            CHECK(k2.at(y, x) == doctest::Approx(k2.at(x, 4 - y)).epsilon(1e-12)); // 90 deg
            CHECK(k2.at(y, x) == doctest::Approx(k2.at(4 - y, 4 - x)).epsilon(1e-12));
        }

    CHECK_THROWS_AS(disk_kernel(-1.0), std::invalid_argument);
}

TEST_CASE("200 random kernels are non-negative and normalized") {
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        Kernel2D k;
        if (i % 2 == 0)
            k = motion_kernel(1.0 + rng.uniform() * 20.0, rng.uniform() * 360.0);
        else
            k = disk_kernel(rng.uniform() * 6.0);
        CHECK(std::abs(k.sum() - 1.0) < 1e-6);
        for (double w : k.weights) CHECK(w >= 0.0);
    }
}

TEST_CASE("blur never expands the dynamic range") {
    Rng rng(123);
    for (int i = 0; i < 10; ++i) {
        const Image img = random_image(24, 24, 1, 400 + i);
        const Kernel2D k = i % 2 ? motion_kernel(2.0 + rng.uniform() * 8, rng.uniform() * 180)
                                 : disk_kernel(0.5 + rng.uniform() * 3);
        if (k.width >= img.width || k.height >= img.height) continue;
        const Image out = convolve(img, k);
        const auto [in_min, in_max] =
            std::minmax_element(img.data.begin(), img.data.end());
        const auto [out_min, out_max] =
            std::minmax_element(out.data.begin(), out.data.end());
        CHECK(*out_min >= *in_min - 1e-9);
        CHECK(*out_max <= *in_max + 1e-9);
    }
}

TEST_CASE("apply_recipe: empty recipe, composition, determinism") {
    const Image img = random_image(48, 48, 3, 12);

    DegradationRecipe empty;
    empty.master_seed = 5;
    CHECK(apply_recipe(img, empty).data == img.data);

    BlurSpec blur;
    blur.kind = BlurSpec::Kind::motion;
    blur.length = 9;
    blur.angle = 0;
    NoiseSpec noise;
    noise.kind = NoiseSpec::Kind::awgn;
    noise.sigma = 25;
    const DegradationRecipe recipe = DegradationRecipe::blur_noise(blur, noise, 77);

    const Image got = apply_recipe(img, recipe);
    const Image manual = add_awgn(clamp01(convolve(img, motion_kernel(9, 0))), 25.0,
                                  derive_seed(77, 1));
    CHECK(got.data == manual.data);

    CHECK(apply_recipe(img, recipe).data == got.data);
}

TEST_CASE("single-step recipe equals the op with the derived seed") {
    const Image img = random_image(32, 32, 1, 13);
    NoiseSpec sp;
    sp.kind = NoiseSpec::Kind::salt_pepper;
    sp.p = 0.2;
    DegradationRecipe r;
    r.steps = {sp};
    r.master_seed = 501;
    CHECK(apply_recipe(img, r).data ==
          add_salt_pepper(img, 0.2, derive_seed(501, 0)).data);
}

TEST_CASE("recipe JSON round trip") {
    BlurSpec blur;
    blur.kind = BlurSpec::Kind::disk;
    blur.radius = 2.5;
    NoiseSpec sp;
    sp.kind = NoiseSpec::Kind::poisson;
    sp.peak = 500;
    DegradationRecipe r;
    r.steps = {blur, sp};
    r.master_seed = 987654321;

    const DegradationRecipe back = recipe_from_json(recipe_to_json(r));
    CHECK(back.master_seed == r.master_seed);
    REQUIRE(back.steps.size() == 2);
    CHECK(std::get<BlurSpec>(back.steps[0]).radius == 2.5);
    CHECK(std::get<NoiseSpec>(back.steps[1]).peak == 500);

    const Image img = random_image(32, 32, 1, 14);
    CHECK(apply_recipe(img, back).data == apply_recipe(img, r).data);
}
