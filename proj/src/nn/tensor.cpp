#include "ir/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ir::nn {

std::string Tensor::shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0f);
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor image_to_tensor(const Image& img) {
    img.validate();
    Tensor t(1, img.channels, img.height, img.width);
    std::copy(img.data.begin(), img.data.end(), t.data.begin());
    return t;
}

Tensor batch_to_tensor(const std::vector<Image>& imgs) {
    if (imgs.empty()) throw std::invalid_argument("empty image batch");
    const Image& first = imgs.front();
    Tensor t(static_cast<int>(imgs.size()), first.channels, first.height, first.width);
    for (size_t i = 0; i < imgs.size(); ++i) {
        if (!imgs[i].same_shape(first))
            throw std::invalid_argument("batch images must share one shape");
        std::copy(imgs[i].data.begin(), imgs[i].data.end(),
                  t.data.begin() + i * imgs[i].data.size());
    }
    return t;
}

Image tensor_to_image(const Tensor& t, int batch_index, bool clamp) {
    if (batch_index < 0 || batch_index >= t.n)
        throw std::invalid_argument("batch index out of range");
    Image img(t.w, t.h, t.c);
    const float* src = t.data.data() + static_cast<size_t>(batch_index) * t.c * t.h * t.w;
    std::copy(src, src + img.data.size(), img.data.begin());
    if (clamp)
        for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

} // namespace ir::nn
