#pragma once

#include <cstdint>
#include <vector>

#include "ir/nn/unet.hpp"

namespace ir::nn {

// Bias-corrected Adam. First and second moments are kept per parameter
// tensor in visit order; BN running statistics are not parameters and are
// never touched here.
struct AdamState {
    int64_t t = 0; // completed steps
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<Tensor> m, v;

    void initialize(UNet& model);
    bool initialized() const { return !m.empty(); }
};

// One elementwise update; arithmetic in double, storage in f32. Exposed so
// the closed-form single-step tests exercise exactly the production path.
void adam_update_tensor(Tensor& w, const Tensor& g, Tensor& m, Tensor& v,
                        int64_t t, double lr, double beta1, double beta2, double eps);

// Applies one step across every model parameter using the gradients
// accumulated in the layers. Increments state.t.
void adam_step(UNet& model, AdamState& state, double lr);

} // namespace ir::nn
