#pragma once

#include <string>
#include <vector>

#include "ir/nn/loss.hpp"
#include "ir/nn/optim.hpp"
#include "ir/nn/unet.hpp"

namespace ir::nn {

// A training pair; both images must share one patch shape with spatial dims
// divisible by 16.
struct TrainSample {
    Image degraded;
    Image clean;
};

struct HistoryRow {
    int64_t step = 0;
    Stage stage = Stage::coarse;
    double loss = 0.0;
    double ssim_term = 0.0;
    double psnr_term = 0.0;
    double l2_term = 0.0;
    double edge_term = 0.0;
};

// Runs `steps` optimizer steps of the configured stage over the corpus with
// seeded epoch shuffling and a fixed accumulation order. Deterministic for a
// fixed (seed, corpus order). Throws on NaN loss or gradients.
std::vector<HistoryRow> train_stage(UNet& model, AdamState& opt,
                                    const std::vector<TrainSample>& corpus,
                                    const TrainConfig& cfg, int steps);

// CSV: step,stage,loss,ssim_term,psnr_term,l2_term,edge_term
void write_history_csv(const std::vector<HistoryRow>& rows, const std::string& path);

// Eval-mode forward on a full image: reflect-pads to the next multiple of 16,
// crops back, clamps to [0,1].
Image restore(UNet& model, const Image& img);

} // namespace ir::nn
