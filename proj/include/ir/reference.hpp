#pragma once

#include <vector>

#include "ir/image.hpp"

namespace ir::ref {

// Serial nested-loop implementations kept alongside the OpenMP kernels.
// They are the independent oracles the test suites compare against and the
// baseline side of tools/kernel_bench. None of them call into the parallel
// code paths.

Image convolve(const Image& img, const Kernel2D& k);
Image sobel_magnitude(const Image& img);

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, double peak);
double ssim(const Image& a, const Image& b);
double edge_loss(const Image& a, const Image& b);

// Naive NCHW 3x3/1x1 convolution with zero padding, matching the layer
// contract of the neural restorer.
void conv2d_nchw(const float* x, int n, int ic, int h, int w,
                 const float* weight, const float* bias, int oc, int ksize,
                 float* y);

} // namespace ir::ref
