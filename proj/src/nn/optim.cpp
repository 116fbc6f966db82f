#include "ir/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ir::nn {

void AdamState::initialize(UNet& model) {
    m.clear();
    v.clear();
    t = 0;
    model.visit_params([&](const std::string&, Tensor& p) {
        m.emplace_back(p.n, p.c, p.h, p.w);
        v.emplace_back(p.n, p.c, p.h, p.w);
    });
}

void adam_update_tensor(Tensor& w, const Tensor& g, Tensor& m, Tensor& v,
                        int64_t t, double lr, double beta1, double beta2, double eps) {
    if (!w.same_shape(g) || !w.same_shape(m) || !w.same_shape(v))
        throw std::invalid_argument("adam update shape mismatch");
    if (t < 1) throw std::invalid_argument("adam step index must be >= 1");

    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(w.size()); ++i) {
        const double gi = g.data[i];
        const double mi = beta1 * m.data[i] + (1.0 - beta1) * gi;
        const double vi = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
        m.data[i] = static_cast<float>(mi);
        v.data[i] = static_cast<float>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        w.data[i] = static_cast<float>(w.data[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

void adam_step(UNet& model, AdamState& state, double lr) {
    if (!state.initialized()) state.initialize(model);
    ++state.t;

    std::vector<Tensor*> params, grads;
    model.visit_params([&](const std::string&, Tensor& p) { params.push_back(&p); });
    model.visit_grads([&](const std::string&, Tensor& g) { grads.push_back(&g); });
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::logic_error("optimizer state desynchronized from model");

    for (size_t i = 0; i < params.size(); ++i)
        adam_update_tensor(*params[i], *grads[i], state.m[i], state.v[i], state.t, lr,
                           state.beta1, state.beta2, state.eps);
}

} // namespace ir::nn
