#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ir/bench.hpp"
#include "ir/rng.hpp"

namespace ir::bench {

Image synth_scene(int size, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x7363656e /* "scen" */));

    const double gx = rng.uniform() * 2.0 - 1.0;
    const double gy = rng.uniform() * 2.0 - 1.0;
    const double vx = rng.uniform();
    const double vy = rng.uniform();

    struct Blob {
        double cx, cy, sigma, amp;
    };
    std::vector<Blob> blobs(6);
    for (Blob& b : blobs) {
        b.cx = rng.uniform() * size;
        b.cy = rng.uniform() * size;
        b.sigma = (0.08 + 0.20 * rng.uniform()) * size;
        b.amp = -0.25 + 0.60 * rng.uniform();
    }

    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves(6);
    for (Wave& w : waves) {
        w.fx = 2.0 + 6.0 * rng.uniform();
        w.fy = 2.0 + 6.0 * rng.uniform();
        w.phase = rng.uniform() * 6.283185307179586;
        w.amp = 0.015 + 0.035 * rng.uniform();
    }

    std::vector<double> lum(static_cast<size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / size;
            const double v = static_cast<double>(y) / size;
            double val = 0.5 + 0.25 * (gx * (u - 0.5) + gy * (v - 0.5));
            const double dvx = u - vx, dvy = v - vy;
            val -= 0.3 * (dvx * dvx + dvy * dvy); // vignette toward a random corner
            for (const Blob& b : blobs) {
                const double dx = x - b.cx, dy = y - b.cy;
                val += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
            }
            for (const Wave& w : waves)
                val += w.amp * std::sin(6.283185307179586 * (w.fx * u + w.fy * v) + w.phase);
            lum[static_cast<size_t>(y) * size + x] = val;
        }

    const auto [mn_it, mx_it] = std::minmax_element(lum.begin(), lum.end());
    const double mn = *mn_it, mx = *mx_it;
    const double scale = mx > mn ? 0.88 / (mx - mn) : 1.0;
    for (double& v : lum) v = 0.06 + (v - mn) * scale;

    // raw-sensor-like color cast: green reference, red/blue depressed
    const double tint[3] = {0.70 + 0.25 * rng.uniform(), 1.0, 0.55 + 0.35 * rng.uniform()};

    Image img(size, size, 3);
    for (int c = 0; c < 3; ++c) {
        float* dst = img.plane(c).data();
        for (size_t i = 0; i < lum.size(); ++i)
            dst[i] = static_cast<float>(std::clamp(lum[i] * tint[c], 0.0, 1.0));
    }

    // specular dots, clipped near saturation like wet-tissue highlights
    const int ndots = 2 + static_cast<int>(rng.next_u64() % 3);
    for (int d = 0; d < ndots; ++d) {
        const double cx = rng.uniform() * size;
        const double cy = rng.uniform() * size;
        const double s = 1.0 + 2.0 * rng.uniform();
        const int r = static_cast<int>(std::ceil(3 * s));
        for (int y = std::max(0, static_cast<int>(cy) - r);
             y <= std::min(size - 1, static_cast<int>(cy) + r); ++y)
            for (int x = std::max(0, static_cast<int>(cx) - r);
                 x <= std::min(size - 1, static_cast<int>(cx) + r); ++x) {
                const double dx = x - cx, dy = y - cy;
                const double a = 0.9 * std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
                for (int c = 0; c < 3; ++c)
                    img.at(c, y, x) = static_cast<float>(
                        std::min(1.0, img.at(c, y, x) + a));
            }
    }
    return img;
}

Manifest synth_corpus(int n, int size, uint64_t seed, const std::string& out_dir) {
    if (n < 1) throw std::invalid_argument("corpus size must be >= 1");
    if (size % 16 != 0) throw std::invalid_argument("scene size must be divisible by 16");

    std::filesystem::create_directories(out_dir);
    Manifest m;
    const int train_count = (n * 3 + 3) / 4; // 75/25 split
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04d", i);
        const std::string path = out_dir + "/" + name + ".png";
        save_image(synth_scene(size, derive_seed(seed, static_cast<uint64_t>(i))), path);
        ManifestEntry e;
        e.id = name;
        e.clean_path = path;
        e.split = i < train_count ? "train" : "val";
        m.entries.push_back(std::move(e));
    }
    m.save(out_dir + "/manifest.jsonl");
    return m;
}

} // namespace ir::bench
