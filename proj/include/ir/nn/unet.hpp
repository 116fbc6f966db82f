#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "ir/nn/layers.hpp"

namespace ir::nn {

// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, added to a 1x1-projected copy of
// the input (projection present whenever channel counts differ), ReLU after
// the add.
struct ResidualBlock {
    int in_c = 0, out_c = 0;
    Conv2d conv1, conv2;
    BatchNorm2d bn1, bn2;
    Conv2d proj; // 1x1, only when in_c != out_c
    ReLU relu_mid, relu_out;
    bool has_proj = false;

    ResidualBlock() = default;
    ResidualBlock(int in_channels, int out_channels);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    void zero_grad();
};

// Depth-4 residual UNet: encoder widths (w, 2w, 4w, 8w), bottleneck 16w,
// nearest-neighbor upsampling with a 3x3 conv, skip concatenation, and a
// final 1x1 conv back to 3 channels. Spatial dims must be divisible by 16.
class UNet {
public:
    static constexpr int kDepth = 4;
    static constexpr int kDivisor = 16; // 2^depth

    UNet() = default;
    UNet(int base_width, uint64_t seed);

    int base_width() const { return base_width_; }

    Tensor forward(const Tensor& x, bool train);
    // Gradient of the last train-mode forward. Accumulates parameter
    // gradients and returns the input gradient.
    Tensor backward(const Tensor& gy);
    void zero_grad();

    // Enumerates learnable parameter tensors (stable order and names).
    // `grads` enumerates the matching gradient tensors in the same order.
    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
    void visit_grads(const std::function<void(const std::string&, Tensor&)>& fn);
    // BN running statistics (saved with checkpoints, untouched by Adam).
    void visit_state(const std::function<void(const std::string&, Tensor&)>& fn);

    int64_t parameter_count();
    // Closed-form count for a given base width; the constructor's layer
    // bookkeeping must agree with it.
    static int64_t expected_parameter_count(int base_width);

private:
    int base_width_ = 0;
    std::array<ResidualBlock, kDepth> enc_;
    std::array<MaxPool2x2, kDepth> pool_;
    ResidualBlock bottleneck_;
    std::array<UpsampleNearest2x, kDepth> up_;
    std::array<Conv2d, kDepth> upconv_;
    std::array<ResidualBlock, kDepth> dec_;
    Conv2d final_conv_;

    std::array<int, kDepth> skip_channels_{};
};

} // namespace ir::nn
