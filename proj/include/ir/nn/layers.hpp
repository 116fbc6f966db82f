#pragma once

#include <cstdint>

#include "ir/nn/tensor.hpp"

namespace ir::nn {

// Layers own their parameters, parameter gradients and whatever activations
// the backward pass needs. forward(x, train) caches only when train is true;
// backward consumes the cache and returns the input gradient. Parameter
// gradients accumulate until zero_grad().
//
// All loops are gather-form per output element (or per parameter), so the
// arithmetic order is fixed and results are identical for any thread count.

struct Conv2d {
    int in_c = 0, out_c = 0, ksize = 3;
    Tensor weight; // (out_c, in_c, k, k)
    Tensor bias;   // (out_c, 1, 1, 1)
    Tensor gweight, gbias;

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel_size);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    void zero_grad();

    Tensor x_cache;
};

struct BatchNorm2d {
    int channels = 0;
    double momentum = 0.1;
    double eps = 1e-5;
    Tensor gamma, beta;               // (1, c, 1, 1)
    Tensor running_mean, running_var; // (1, c, 1, 1)
    Tensor ggamma, gbeta;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int c);

    // train: batch statistics, running stats updated.
    // eval: fixed affine map from the running stats.
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy); // train-mode only
    void zero_grad();

    Tensor xhat_cache;            // normalized pre-scale activations
    std::vector<double> inv_std_cache;
};

struct ReLU {
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    std::vector<uint8_t> mask_cache;
};

struct MaxPool2x2 {
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    std::vector<uint8_t> argmax_cache; // 0..3 within each 2x2 block
    int in_h = 0, in_w = 0;
};

struct UpsampleNearest2x {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
};

// channel-wise concatenation [a ; b]
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb);

// y = a + b elementwise (shapes must match)
Tensor add(const Tensor& a, const Tensor& b);

} // namespace ir::nn
