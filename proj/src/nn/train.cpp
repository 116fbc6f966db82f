#include "ir/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ir/rng.hpp"

namespace ir::nn {

std::vector<HistoryRow> train_stage(UNet& model, AdamState& opt,
                                    const std::vector<TrainSample>& corpus,
                                    const TrainConfig& cfg, int steps) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
    for (const TrainSample& s : corpus) {
        if (!s.degraded.same_shape(s.clean))
            throw std::invalid_argument("training pair shape mismatch");
        if (s.degraded.height % UNet::kDivisor != 0 || s.degraded.width % UNet::kDivisor != 0)
            throw std::invalid_argument("training patches must be divisible by 16");
    }
    if (steps < 1) throw std::invalid_argument("step count must be >= 1");

    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();
    uint64_t epoch = 0;

    std::vector<HistoryRow> history;
    history.reserve(steps);
    std::vector<Image> degraded_batch, clean_batch;

    for (int step = 1; step <= steps; ++step) {
        degraded_batch.clear();
        clean_batch.clear();
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor == order.size()) {
                Rng rng(derive_seed(cfg.seed, 0x65706f63 /* "epoc" */ + epoch++));
                for (size_t j = order.size() - 1; j > 0; --j)
                    std::swap(order[j], order[rng.next_u64() % (j + 1)]);
                cursor = 0;
            }
            const TrainSample& s = corpus[order[cursor++]];
            degraded_batch.push_back(s.degraded);
            clean_batch.push_back(s.clean);
        }

        const Tensor x = batch_to_tensor(degraded_batch);
        const Tensor target = batch_to_tensor(clean_batch);

        const Tensor pred = model.forward(x, /*train=*/true);
        Tensor grad;
        const LossTerms terms = cfg.stage == Stage::coarse
                                    ? loss_total(pred, target, cfg, &grad)
                                    : loss_fine(pred, target, cfg, &grad);
        if (!std::isfinite(terms.total))
            throw std::runtime_error("non-finite loss at step " + std::to_string(step) +
                                     " (stage " +
                                     (cfg.stage == Stage::coarse ? "coarse" : "fine") + ")");
        if (!grad.all_finite())
            throw std::runtime_error("non-finite loss gradient at step " + std::to_string(step));

        model.zero_grad();
        model.backward(grad);
        adam_step(model, opt, cfg.lr);

        HistoryRow row;
        row.step = opt.t;
        row.stage = cfg.stage;
        row.loss = terms.total;
        row.ssim_term = terms.ssim_term;
        row.psnr_term = terms.psnr_term;
        row.l2_term = terms.l2_term;
        row.edge_term = terms.edge_term;
        history.push_back(row);
    }
    return history;
}

void write_history_csv(const std::vector<HistoryRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument(path + ": cannot open history CSV for writing");
    f << "step,stage,loss,ssim_term,psnr_term,l2_term,edge_term\n";
    char buf[256];
    for (const HistoryRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(r.step),
                      r.stage == Stage::coarse ? "coarse" : "fine", r.loss, r.ssim_term,
                      r.psnr_term, r.l2_term, r.edge_term);
        f << buf;
    }
}

Image restore(UNet& model, const Image& img) {
    img.validate();
    if (img.channels != 3)
        throw std::invalid_argument("restore expects a 3-channel image");

    const int target_h = (img.height + UNet::kDivisor - 1) / UNet::kDivisor * UNet::kDivisor;
    const int target_w = (img.width + UNet::kDivisor - 1) / UNet::kDivisor * UNet::kDivisor;

    Image padded(target_w, target_h, 3);
    padded.peak = img.peak;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < target_h; ++y)
            for (int x = 0; x < target_w; ++x)
                padded.at(c, y, x) =
                    img.at(c, reflect101(y, img.height), reflect101(x, img.width));

    const Tensor out = model.forward(image_to_tensor(padded), /*train=*/false);

    Image result(img.width, img.height, 3);
    result.peak = img.peak;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                result.at(c, y, x) =
                    std::clamp(out.at(0, c, y, x), 0.0f, 1.0f);
    return result;
}

} // namespace ir::nn
