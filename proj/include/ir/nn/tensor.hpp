#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ir/image.hpp"

namespace ir::nn {

// Dense NCHW float tensor. Gradients, when a caller tracks them, live in a
// second Tensor of the same shape.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;
    std::vector<float> grad; // optional; empty unless requested

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const;

    float& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    float at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    float* plane(int in, int ic) {
        return data.data() + (static_cast<size_t>(in) * c + ic) * h * w;
    }
    const float* plane(int in, int ic) const {
        return data.data() + (static_cast<size_t>(in) * c + ic) * h * w;
    }

    void ensure_grad();       // allocate (zeroed) grad buffer
    void zero_grad();
    bool all_finite() const;  // data only
};

// Image <-> tensor bridges. Images carry planar [0,1] floats already, so
// these are layout copies.
Tensor image_to_tensor(const Image& img);
Tensor batch_to_tensor(const std::vector<Image>& imgs);
Image tensor_to_image(const Tensor& t, int batch_index, bool clamp = true);

} // namespace ir::nn
