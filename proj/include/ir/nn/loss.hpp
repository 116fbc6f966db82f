#pragma once

#include <cstdint>

#include "ir/nn/tensor.hpp"

namespace ir::nn {

enum class Stage { coarse, fine };

struct TrainConfig {
    int base_width = 16;
    double lr = 1e-4;
    int batch = 1;
    Stage stage = Stage::coarse;
    double w_ssim = 1.0;
    double w_psnr = 1.0;
    double w_l2 = 1.0;
    double w_edge = 1.0;
    double psnr_cap = 50.0; // dB; PSNR term saturates here
    uint64_t seed = 0;

    void validate() const;
};

struct LossTerms {
    double total = 0.0;
    double ssim_term = 0.0; // mean of w_ssim * (1 - SSIM)
    double psnr_term = 0.0; // mean of w_psnr * (1 - min(PSNR, cap)/cap)
    double l2_term = 0.0;   // mean of w_l2 * MSE
    double edge_term = 0.0; // mean of w_edge * edge loss (fine stage)
};

// Coarse-stage objective: batch mean of
//   w_ssim*(1-SSIM) + w_psnr*(1-min(PSNR,cap)/cap) + w_l2*MSE
// SSIM uses the 11x11 Gaussian window with reflect borders; the PSNR log is
// floored at MSE 1e-10. When `grad` is non-null it receives dLoss/dpred.
LossTerms loss_total(const Tensor& pred, const Tensor& target, const TrainConfig& cfg,
                     Tensor* grad);

// Fine-stage objective: batch mean of w_ssim*(1-SSIM) + w_edge*EDGE, where
// EDGE is the mean absolute Sobel-magnitude difference (eps-smoothed sqrt so
// the stencil chain stays differentiable).
LossTerms loss_fine(const Tensor& pred, const Tensor& target, const TrainConfig& cfg,
                    Tensor* grad);

// Per-batch-item metric pieces, exposed for the loss breakdown.
double tensor_mse(const Tensor& pred, const Tensor& target, int item);

} // namespace ir::nn
