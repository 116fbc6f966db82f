#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ir/nn/layers.hpp"
#include "ir/nn/loss.hpp"
#include "ir/nn/unet.hpp"
#include "ir/rng.hpp"

using namespace ir;
using namespace ir::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(n, c, h, w);
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(lo + (hi - lo) * rng.uniform());
    return t;
}

// projection functional: loss = sum(proj .* f(x)), so dloss/dy = proj
double project(const Tensor& y, const Tensor& proj) {
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i)
        acc += static_cast<double>(y.data[i]) * proj.data[i];
    return acc;
}

struct GradStats {
    double max_rel = 0.0;
    double median_rel = 0.0;
    size_t kinked = 0; // coordinates excluded by the h-stability filter
    size_t total = 0;
};

// Central finite differences against an analytic gradient over every element
// of `target`, where loss() re-runs the forward pass. A coordinate whose FD
// estimate changes between h and h/2 sits on a kink (ReLU, |.|, max) inside
// the probed interval; FD is not a valid oracle there and the coordinate is
// excluded. The caller bounds the excluded fraction.
GradStats fd_compare(std::vector<float>& target, const std::vector<float>& analytic,
                     const std::function<double()>& loss, double h = 1e-3) {
    REQUIRE(target.size() == analytic.size());
    auto central = [&](size_t i, double step) {
        const float keep = target[i];
        target[i] = keep + static_cast<float>(step);
        const double up = loss();
        target[i] = keep - static_cast<float>(step);
        const double down = loss();
        target[i] = keep;
        return (up - down) / (2.0 * step);
    };

    GradStats s;
    s.total = target.size();
    std::vector<double> rel;
    rel.reserve(target.size());
    for (size_t i = 0; i < target.size(); ++i) {
        const double fd = central(i, h);
        const double fd2 = central(i, h / 2);
        const double an = analytic[i];
        if (std::abs(fd - fd2) > 0.1 * (std::abs(fd2) + std::abs(an) + 1e-5)) {
            ++s.kinked;
            continue;
        }
        rel.push_back(std::abs(fd - an) / (std::abs(fd) + std::abs(an) + 1e-5));
    }
    REQUIRE(!rel.empty());
    for (double r : rel) s.max_rel = std::max(s.max_rel, r);
    std::nth_element(rel.begin(), rel.begin() + rel.size() / 2, rel.end());
    s.median_rel = rel[rel.size() / 2];
    return s;
}

void require_grad_ok(const GradStats& s) {
    CHECK(s.max_rel < 1e-2);
    CHECK(s.median_rel < 1e-3);
    CHECK(s.kinked <= s.total / 20);
}

// step sizes: conv/upsample are linear in every argument, so a larger h has
// no truncation error and drowns float32 evaluation noise; piecewise-linear
// and rational ops stay at small h to keep the probe local
constexpr double kH_linear = 2e-2;
constexpr double kH_bn = 5e-3;
constexpr double kH_kinked = 1e-3;

// The edge term carries |S(a)-S(b)|: at a pixel where the two magnitudes
// tie, the abs contributes zero to a straddling central difference but a
// full +-1 subgradient to the analytic side, and the bias leaks into every
// coordinate the tied pixel's Sobel window touches. Those coordinates are
// outside the FD oracle's validity domain, so they get masked up front.
std::vector<uint8_t> edge_tie_mask(const Tensor& pred, const Tensor& target, double tol) {
    std::vector<uint8_t> skip(pred.size(), 0);
    for (int n = 0; n < pred.n; ++n)
        for (int c = 0; c < pred.c; ++c) {
            Image a(pred.w, pred.h, 1), b(pred.w, pred.h, 1);
            std::copy(pred.plane(n, c), pred.plane(n, c) + a.data.size(), a.data.begin());
            std::copy(target.plane(n, c), target.plane(n, c) + b.data.size(), b.data.begin());
            const Image sa = sobel_magnitude(a);
            const Image sb = sobel_magnitude(b);
            for (int y = 0; y < pred.h; ++y)
                for (int x = 0; x < pred.w; ++x) {
                    if (std::abs(sa.at(0, y, x) - sb.at(0, y, x)) >= tol) continue;
                    for (int dy = -2; dy <= 2; ++dy)
                        for (int dx = -2; dx <= 2; ++dx) {
                            const int yy = y + dy, xx = x + dx;
                            if (yy < 0 || yy >= pred.h || xx < 0 || xx >= pred.w) continue;
                            skip[((static_cast<size_t>(n) * pred.c + c) * pred.h + yy) *
                                     pred.w +
                                 xx] = 1;
                        }
                }
        }
    return skip;
}

GradStats fd_compare_masked(std::vector<float>& target, const std::vector<float>& analytic,
                            const std::function<double()>& loss, double h,
                            const std::vector<uint8_t>& skip) {
    std::vector<float> t_sub;
    std::vector<size_t> index;
    for (size_t i = 0; i < target.size(); ++i)
        if (!skip[i]) index.push_back(i);
    REQUIRE(index.size() >= target.size() / 2); // the mask must stay a minority

    // evaluate only unmasked coordinates through the standard harness
    GradStats s;
    s.total = index.size();
    std::vector<double> rel;
    auto central = [&](size_t i, double step) {
        const float keep = target[i];
        target[i] = keep + static_cast<float>(step);
        const double up = loss();
        target[i] = keep - static_cast<float>(step);
        const double down = loss();
        target[i] = keep;
        return (up - down) / (2.0 * step);
    };
    for (size_t i : index) {
        const double fd = central(i, h);
        const double fd2 = central(i, h / 2);
        const double an = analytic[i];
        if (std::abs(fd - fd2) > 0.1 * (std::abs(fd2) + std::abs(an) + 1e-5)) {
            ++s.kinked;
            continue;
        }
        rel.push_back(std::abs(fd - an) / (std::abs(fd) + std::abs(an) + 1e-5));
    }
    REQUIRE(!rel.empty());
    for (double r : rel) s.max_rel = std::max(s.max_rel, r);
    std::nth_element(rel.begin(), rel.begin() + rel.size() / 2, rel.end());
    s.median_rel = rel[rel.size() / 2];
    return s;
}

} // namespace

TEST_CASE("conv3x3 gradients: input, weight, bias") {
    Conv2d conv(3, 4, 3);
    Rng rng(1);
    for (float& v : conv.weight.data) v = static_cast<float>(rng.normal() * 0.3);
    for (float& v : conv.bias.data) v = static_cast<float>(rng.normal() * 0.1);

    Tensor x = random_tensor(2, 3, 8, 8, 2);
    const Tensor proj = random_tensor(2, 4, 8, 8, 3);

    conv.zero_grad();
    conv.forward(x, true);
    const Tensor gx = conv.backward(proj);

    auto loss = [&] { return project(conv.forward(x, false), proj); };
    require_grad_ok(fd_compare(x.data, gx.data, loss, kH_linear));
    require_grad_ok(fd_compare(conv.weight.data, conv.gweight.data, loss, kH_linear));
    require_grad_ok(fd_compare(conv.bias.data, conv.gbias.data, loss, kH_linear));
}

TEST_CASE("conv1x1 gradients") {
    Conv2d conv(5, 2, 1);
    Rng rng(4);
    for (float& v : conv.weight.data) v = static_cast<float>(rng.normal() * 0.4);

    Tensor x = random_tensor(1, 5, 6, 6, 5);
    const Tensor proj = random_tensor(1, 2, 6, 6, 6);
    conv.zero_grad();
    conv.forward(x, true);
    const Tensor gx = conv.backward(proj);

    auto loss = [&] { return project(conv.forward(x, false), proj); };
    require_grad_ok(fd_compare(x.data, gx.data, loss, kH_linear));
    require_grad_ok(fd_compare(conv.weight.data, conv.gweight.data, loss, kH_linear));
}

TEST_CASE("batchnorm train-mode gradients: input, gamma, beta") {
    BatchNorm2d bn(4);
    Rng rng(7);
    for (float& v : bn.gamma.data) v = static_cast<float>(0.5 + rng.uniform());
    for (float& v : bn.beta.data) v = static_cast<float>(rng.normal() * 0.2);

    Tensor x = random_tensor(2, 4, 6, 6, 8);
    const Tensor proj = random_tensor(2, 4, 6, 6, 9);

    // keep running stats frozen for repeated loss evaluations
    auto loss = [&] {
        BatchNorm2d copy = bn;
        return project(copy.forward(x, true), proj);
    };

    BatchNorm2d work = bn;
    work.zero_grad();
    work.forward(x, true);
    const Tensor gx = work.backward(proj);

    require_grad_ok(fd_compare(x.data, gx.data, loss, kH_bn));
    require_grad_ok(fd_compare(bn.gamma.data, work.ggamma.data, loss, kH_bn));
    require_grad_ok(fd_compare(bn.beta.data, work.gbeta.data, loss, kH_bn));
}

TEST_CASE("batchnorm normalizes batch statistics") {
    BatchNorm2d bn(3);
    Tensor x = random_tensor(4, 3, 8, 8, 10, 0.0, 5.0);
    bn.forward(x, true);

    const size_t plane = 8 * 8;
    for (int c = 0; c < 3; ++c) {
        double sum = 0, sq = 0;
        for (int n = 0; n < 4; ++n) {
            const float* p = bn.xhat_cache.plane(n, c);
            for (size_t i = 0; i < plane; ++i) {
                sum += p[i];
                sq += static_cast<double>(p[i]) * p[i];
            }
        }
        const double count = 4.0 * plane;
        const double mean = sum / count;
        const double var = sq / count - mean * mean;
        CHECK(std::abs(mean) < 1e-4);
        CHECK(std::abs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm eval mode is a fixed affine map") {
    BatchNorm2d bn(2);
    Rng rng(11);
    for (float& v : bn.running_mean.data) v = static_cast<float>(rng.normal());
    for (float& v : bn.running_var.data) v = static_cast<float>(0.5 + rng.uniform());

    const Tensor x = random_tensor(1, 2, 4, 4, 12);
    const Tensor y1 = bn.forward(x, false);
    const Tensor y2 = bn.forward(x, false);
    CHECK(y1.data == y2.data);
}

TEST_CASE("relu gradient off the kink") {
    ReLU relu;
    Tensor x = random_tensor(2, 3, 5, 5, 13);
    for (float& v : x.data)
        if (std::abs(v) < 0.1f) v = v < 0 ? v - 0.2f : v + 0.2f;

    const Tensor proj = random_tensor(2, 3, 5, 5, 14);
    relu.forward(x, true);
    const Tensor gx = relu.backward(proj);
    auto loss = [&] { return project(relu.forward(x, false), proj); };
    require_grad_ok(fd_compare(x.data, gx.data, loss, kH_kinked));
}

TEST_CASE("maxpool gradient routes to the argmax") {
    MaxPool2x2 pool;
    Tensor x = random_tensor(2, 2, 6, 6, 15);
    const Tensor proj = random_tensor(2, 2, 3, 3, 16);
    pool.forward(x, true);
    const Tensor gx = pool.backward(proj);
    auto loss = [&] { return project(pool.forward(x, false), proj); };
    require_grad_ok(fd_compare(x.data, gx.data, loss, kH_kinked));
}

TEST_CASE("nearest upsample forward and gradient") {
    UpsampleNearest2x up;
    Tensor x = random_tensor(1, 2, 3, 3, 17);
    const Tensor y = up.forward(x);
    for (int yy = 0; yy < 6; ++yy)
        for (int xx = 0; xx < 6; ++xx)
            CHECK(y.at(0, 1, yy, xx) == x.at(0, 1, yy / 2, xx / 2));

    const Tensor proj = random_tensor(1, 2, 6, 6, 18);
    const Tensor gx = up.backward(proj);
    auto loss = [&] { return project(up.forward(x), proj); };
    require_grad_ok(fd_compare(x.data, gx.data, loss, kH_linear));
}

TEST_CASE("concat splits gradients back") {
    const Tensor a = random_tensor(1, 2, 4, 4, 19);
    const Tensor b = random_tensor(1, 3, 4, 4, 20);
    const Tensor y = concat_channels(a, b);
    CHECK(y.c == 5);
    Tensor ga, gb;
    split_channels(y, 2, ga, gb);
    CHECK(ga.data == a.data);
    CHECK(gb.data == b.data);
}

TEST_CASE("residual block wiring: projection path and gradient flow") {
    // FD through the whole block is not a valid oracle (internal ReLU kinks
    // shift with every probe); the primitives are FD-checked individually,
    // so the composite is verified structurally instead.
    ResidualBlock block(3, 5);
    Rng rng(21);
    auto jitter = [&](Tensor& t, double s) {
        for (float& v : t.data) v = static_cast<float>(v + rng.normal() * s);
    };
    jitter(block.conv1.weight, 0.05);
    jitter(block.conv2.weight, 0.05);
    jitter(block.proj.weight, 0.05);

    Tensor x = random_tensor(2, 3, 8, 8, 22);
    const Tensor proj = random_tensor(2, 5, 8, 8, 23);

    CHECK(block.has_proj);
    const Tensor y = block.forward(x, true);
    CHECK(y.c == 5);
    for (float v : y.data) CHECK(v >= 0.0f); // ReLU after the add

    block.zero_grad();
    block.forward(x, true);
    const Tensor gx = block.backward(proj);
    CHECK(gx.same_shape(x));

    auto norm1 = [](const Tensor& t) {
        double s = 0;
        for (float v : t.data) s += std::abs(v);
        return s;
    };
    // every parameter of both branches receives gradient
    CHECK(norm1(block.conv1.gweight) > 0.0);
    CHECK(norm1(block.conv2.gweight) > 0.0);
    CHECK(norm1(block.proj.gweight) > 0.0);
    CHECK(norm1(block.bn1.ggamma) > 0.0);
    CHECK(norm1(block.bn2.gbeta) > 0.0);
    CHECK(norm1(gx) > 0.0);

    // determinism of the composite backward
    ResidualBlock again = block;
    again.zero_grad();
    again.forward(x, true);
    const Tensor gx2 = again.backward(proj);
    CHECK(gx.data == gx2.data);
}

TEST_CASE("loss_total: zero at equality, gradient, monotone in noise") {
    TrainConfig cfg;
    const Tensor target = random_tensor(1, 3, 32, 32, 24, 0.1, 0.9);

    Tensor eq = target;
    Tensor grad;
    const LossTerms zero = loss_total(eq, target, cfg, &grad);
    CHECK(zero.total < 1e-9);

    Tensor pred = target;
    Rng rng(25);
    for (float& v : pred.data) v = static_cast<float>(v + rng.normal() * 0.05);
    const LossTerms terms = loss_total(pred, target, cfg, &grad);
    CHECK(terms.total > 0.0);

    auto loss = [&] { return loss_total(pred, target, cfg, nullptr).total; };
    require_grad_ok(fd_compare(pred.data, grad.data, loss));

    double prev = zero.total;
    for (double level : {0.01, 0.02, 0.05, 0.1, 0.2}) {
        Tensor noisy = target;
        Rng r2(26);
        for (float& v : noisy.data) v = static_cast<float>(v + r2.normal() * level);
        const double cur = loss_total(noisy, target, cfg, nullptr).total;
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("loss_fine: zero at equality, gradient, blur-sensitive") {
    TrainConfig cfg;
    cfg.stage = Stage::fine;
    const Tensor target = random_tensor(1, 3, 32, 32, 27, 0.1, 0.9);

    Tensor eq = target;
    CHECK(loss_fine(eq, target, cfg, nullptr).total < 1e-9);

    Tensor pred = target;
    Rng rng(28);
    for (float& v : pred.data) v = static_cast<float>(v + rng.normal() * 0.05);
    Tensor grad;
    loss_fine(pred, target, cfg, &grad);
    auto loss = [&] { return loss_fine(pred, target, cfg, nullptr).total; };
    const auto skip = edge_tie_mask(pred, target, 4e-3);
    require_grad_ok(fd_compare_masked(pred.data, grad.data, loss, 2e-4, skip));

    // blurring the prediction must cost more than the sharp prediction
    Tensor blurred = target;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 1; x < 31; ++x)
                blurred.at(0, c, y, x) = (target.at(0, c, y, x - 1) + target.at(0, c, y, x) +
                                          target.at(0, c, y, x + 1)) /
                                         3.0f;
    CHECK(loss_fine(blurred, target, cfg, nullptr).total >
          loss_fine(eq, target, cfg, nullptr).total);
}

TEST_CASE("loss rejects mismatched shapes") {
    TrainConfig cfg;
    const Tensor a = random_tensor(1, 3, 16, 16, 30);
    const Tensor b = random_tensor(1, 3, 32, 32, 31);
    CHECK_THROWS_AS(loss_total(a, b, cfg, nullptr), std::invalid_argument);
}
