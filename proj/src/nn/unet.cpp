#include "ir/nn/unet.hpp"

#include <stdexcept>

#include "ir/rng.hpp"

namespace ir::nn {

ResidualBlock::ResidualBlock(int in_channels, int out_channels)
    : in_c(in_channels), out_c(out_channels),
      conv1(in_channels, out_channels, 3),
      conv2(out_channels, out_channels, 3),
      bn1(out_channels), bn2(out_channels),
      has_proj(in_channels != out_channels) {
    if (has_proj) proj = Conv2d(in_channels, out_channels, 1);
}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
    Tensor t = conv1.forward(x, train);
    t = bn1.forward(t, train);
    t = relu_mid.forward(t, train);
    t = conv2.forward(t, train);
    t = bn2.forward(t, train);
    const Tensor s = has_proj ? proj.forward(x, train) : x;
    return relu_out.forward(add(t, s), train);
}

Tensor ResidualBlock::backward(const Tensor& gy) {
    const Tensor g_add = relu_out.backward(gy);
    Tensor g = bn2.backward(g_add);
    g = conv2.backward(g);
    g = relu_mid.backward(g);
    g = bn1.backward(g);
    g = conv1.backward(g);
    const Tensor g_skip = has_proj ? proj.backward(g_add) : g_add;
    return add(g, g_skip);
}

void ResidualBlock::zero_grad() {
    conv1.zero_grad();
    conv2.zero_grad();
    bn1.zero_grad();
    bn2.zero_grad();
    if (has_proj) proj.zero_grad();
}

UNet::UNet(int base_width, uint64_t seed) : base_width_(base_width) {
    if (base_width < 4) throw std::invalid_argument("base width must be >= 4");

    int in_c = 3;
    for (int lvl = 0; lvl < kDepth; ++lvl) {
        const int out_c = base_width << lvl;
        enc_[lvl] = ResidualBlock(in_c, out_c);
        skip_channels_[lvl] = out_c;
        in_c = out_c;
    }
    bottleneck_ = ResidualBlock(in_c, base_width << kDepth);

    int cur = base_width << kDepth;
    for (int lvl = kDepth - 1; lvl >= 0; --lvl) {
        const int out_c = base_width << lvl;
        upconv_[lvl] = Conv2d(cur, out_c, 3);
        dec_[lvl] = ResidualBlock(out_c + skip_channels_[lvl], out_c);
        cur = out_c;
    }
    final_conv_ = Conv2d(base_width, 3, 1);

    // He-style init: conv weights ~ N(0, sqrt(2/fan_in)) from one derived
    // stream per tensor; biases and BN beta stay zero, BN gamma stays one
    // (constructor defaults).
    int idx = 0;
    visit_params([&](const std::string& name, Tensor& t) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(idx++)));
        if (name.ends_with(".weight")) {
            const double fan_in = static_cast<double>(t.c) * t.h * t.w;
            const double std = std::sqrt(2.0 / fan_in);
            for (float& v : t.data) v = static_cast<float>(std * rng.normal());
        }
    });
}

Tensor UNet::forward(const Tensor& x, bool train) {
    if (x.c != 3) throw std::invalid_argument("unet expects 3 input channels");
    if (x.h % kDivisor != 0 || x.w % kDivisor != 0)
        throw std::invalid_argument("unet spatial dims must be divisible by 16");

    std::array<Tensor, kDepth> skips;
    Tensor t = x;
    for (int lvl = 0; lvl < kDepth; ++lvl) {
        t = enc_[lvl].forward(t, train);
        skips[lvl] = t;
        t = pool_[lvl].forward(t, train);
    }
    t = bottleneck_.forward(t, train);
    for (int lvl = kDepth - 1; lvl >= 0; --lvl) {
        t = up_[lvl].forward(t);
        t = upconv_[lvl].forward(t, train);
        t = concat_channels(t, skips[lvl]);
        t = dec_[lvl].forward(t, train);
    }
    t = final_conv_.forward(t, train);
    if (!t.all_finite()) throw std::runtime_error("unet forward produced non-finite values");
    return t;
}

Tensor UNet::backward(const Tensor& gy) {
    std::array<Tensor, kDepth> skip_grads;
    Tensor g = final_conv_.backward(gy);
    for (int lvl = 0; lvl < kDepth; ++lvl) {
        g = dec_[lvl].backward(g);
        Tensor g_up;
        split_channels(g, base_width_ << lvl, g_up, skip_grads[lvl]);
        g = upconv_[lvl].backward(g_up);
        g = up_[lvl].backward(g);
    }
    g = bottleneck_.backward(g);
    for (int lvl = kDepth - 1; lvl >= 0; --lvl) {
        g = pool_[lvl].backward(g);
        g = add(g, skip_grads[lvl]);
        g = enc_[lvl].backward(g);
    }
    return g;
}

void UNet::zero_grad() {
    for (auto& b : enc_) b.zero_grad();
    bottleneck_.zero_grad();
    for (auto& c : upconv_) c.zero_grad();
    for (auto& b : dec_) b.zero_grad();
    final_conv_.zero_grad();
}

namespace {
using VisitFn = std::function<void(const std::string&, Tensor&)>;

void visit_block(const std::string& prefix, ResidualBlock& b, bool grads, const VisitFn& fn) {
    fn(prefix + ".conv1.weight", grads ? b.conv1.gweight : b.conv1.weight);
    fn(prefix + ".conv1.bias", grads ? b.conv1.gbias : b.conv1.bias);
    fn(prefix + ".bn1.gamma", grads ? b.bn1.ggamma : b.bn1.gamma);
    fn(prefix + ".bn1.beta", grads ? b.bn1.gbeta : b.bn1.beta);
    fn(prefix + ".conv2.weight", grads ? b.conv2.gweight : b.conv2.weight);
    fn(prefix + ".conv2.bias", grads ? b.conv2.gbias : b.conv2.bias);
    fn(prefix + ".bn2.gamma", grads ? b.bn2.ggamma : b.bn2.gamma);
    fn(prefix + ".bn2.beta", grads ? b.bn2.gbeta : b.bn2.beta);
    if (b.has_proj) {
        fn(prefix + ".proj.weight", grads ? b.proj.gweight : b.proj.weight);
        fn(prefix + ".proj.bias", grads ? b.proj.gbias : b.proj.bias);
    }
}
} // namespace

void UNet::visit_params(const VisitFn& fn) {
    for (int lvl = 0; lvl < kDepth; ++lvl)
        visit_block("enc" + std::to_string(lvl), enc_[lvl], false, fn);
    visit_block("bottleneck", bottleneck_, false, fn);
    for (int lvl = kDepth - 1; lvl >= 0; --lvl) {
        const std::string p = "dec" + std::to_string(lvl);
        fn(p + ".upconv.weight", upconv_[lvl].weight);
        fn(p + ".upconv.bias", upconv_[lvl].bias);
        visit_block(p + ".block", dec_[lvl], false, fn);
    }
    fn("head.weight", final_conv_.weight);
    fn("head.bias", final_conv_.bias);
}

void UNet::visit_grads(const VisitFn& fn) {
    for (int lvl = 0; lvl < kDepth; ++lvl)
        visit_block("enc" + std::to_string(lvl), enc_[lvl], true, fn);
    visit_block("bottleneck", bottleneck_, true, fn);
    for (int lvl = kDepth - 1; lvl >= 0; --lvl) {
        const std::string p = "dec" + std::to_string(lvl);
        fn(p + ".upconv.weight", upconv_[lvl].gweight);
        fn(p + ".upconv.bias", upconv_[lvl].gbias);
        visit_block(p + ".block", dec_[lvl], true, fn);
    }
    fn("head.weight", final_conv_.gweight);
    fn("head.bias", final_conv_.gbias);
}

void UNet::visit_state(const VisitFn& fn) {
    auto block_state = [&](const std::string& prefix, ResidualBlock& b) {
        fn(prefix + ".bn1.running_mean", b.bn1.running_mean);
        fn(prefix + ".bn1.running_var", b.bn1.running_var);
        fn(prefix + ".bn2.running_mean", b.bn2.running_mean);
        fn(prefix + ".bn2.running_var", b.bn2.running_var);
    };
    for (int lvl = 0; lvl < kDepth; ++lvl)
        block_state("enc" + std::to_string(lvl), enc_[lvl]);
    block_state("bottleneck", bottleneck_);
    for (int lvl = kDepth - 1; lvl >= 0; --lvl)
        block_state("dec" + std::to_string(lvl) + ".block", dec_[lvl]);
}

int64_t UNet::parameter_count() {
    int64_t total = 0;
    visit_params([&](const std::string&, Tensor& t) { total += static_cast<int64_t>(t.size()); });
    return total;
}

int64_t UNet::expected_parameter_count(int base_width) {
    auto conv = [](int64_t ic, int64_t oc, int64_t k) { return oc * ic * k * k + oc; };
    auto bn = [](int64_t c) { return 2 * c; };
    auto block = [&](int64_t ic, int64_t oc) {
        int64_t p = conv(ic, oc, 3) + bn(oc) + conv(oc, oc, 3) + bn(oc);
        if (ic != oc) p += conv(ic, oc, 1);
        return p;
    };
    const int64_t w = base_width;
    int64_t total = 0;
    int64_t in_c = 3;
    for (int lvl = 0; lvl < kDepth; ++lvl) {
        total += block(in_c, w << lvl);
        in_c = w << lvl;
    }
    total += block(in_c, w << kDepth);
    int64_t cur = w << kDepth;
    for (int lvl = kDepth - 1; lvl >= 0; --lvl) {
        const int64_t oc = w << lvl;
        total += conv(cur, oc, 3);       // upsample conv
        total += block(oc + oc, oc);     // after skip concat
        cur = oc;
    }
    total += conv(w, 3, 1); // head
    return total;
}

} // namespace ir::nn
