#include "ir/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "ir/rng.hpp"

namespace ir::degrade {

namespace {
constexpr uint64_t kStreamAwgn = 0x6177676e;    // tags keep op streams disjoint
constexpr uint64_t kStreamSpeckle = 0x73706b6c;
constexpr uint64_t kStreamSaltPepper = 0x73616c74;
constexpr uint64_t kStreamPoisson = 0x706f6973;

float clamp01f(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }
} // namespace

Image add_awgn(const Image& img, double sigma8, uint64_t seed) {
    img.validate();
    if (sigma8 < 0.0) throw std::invalid_argument("awgn sigma must be >= 0");
    if (sigma8 == 0.0) return img;

    const double sigma = sigma8 / 255.0;
    const uint64_t key = derive_seed(seed, kStreamAwgn);
    Image out = img;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(img.data.size()); ++i) {
        Rng rng(derive_seed(key, static_cast<uint64_t>(i)));
        out.data[i] = clamp01f(img.data[i] + sigma * rng.normal());
    }
    return out;
}

Image add_speckle(const Image& img, double sigma, uint64_t seed) {
    img.validate();
    if (sigma < 0.0) throw std::invalid_argument("speckle sigma must be >= 0");
    if (sigma == 0.0) return img;

    const uint64_t key = derive_seed(seed, kStreamSpeckle);
    Image out = img;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(img.data.size()); ++i) {
        Rng rng(derive_seed(key, static_cast<uint64_t>(i)));
        out.data[i] = clamp01f(img.data[i] * (1.0 + sigma * rng.normal()));
    }
    return out;
}

Image add_salt_pepper(const Image& img, double p, uint64_t seed) {
    img.validate();
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("salt-pepper p must be in [0,1]");
    if (p == 0.0) return img;

    const uint64_t key = derive_seed(seed, kStreamSaltPepper);
    Image out = img;
    const int64_t npix = static_cast<int64_t>(img.pixel_count());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < npix; ++i) {
        Rng rng(derive_seed(key, static_cast<uint64_t>(i)));
        const double u = rng.uniform();
        if (u >= p) continue;
        const float v = u < p * 0.5 ? 0.0f : 1.0f;
        for (int c = 0; c < img.channels; ++c)
            out.data[static_cast<size_t>(c) * npix + i] = v;
    }
    return out;
}

Image add_poisson(const Image& img, double peak, uint64_t seed) {
    img.validate();
    if (!(peak > 0.0)) throw std::invalid_argument("poisson peak must be > 0");

    const uint64_t key = derive_seed(seed, kStreamPoisson);
    Image out = img;
#pragma omp parallel for schedule(dynamic, 1024)
    for (int64_t i = 0; i < static_cast<int64_t>(img.data.size()); ++i) {
        Rng rng(derive_seed(key, static_cast<uint64_t>(i)));
        const double lambda = std::max(0.0f, img.data[i]) * peak;
        out.data[i] = clamp01f(static_cast<double>(rng.poisson(lambda)) / peak);
    }
    return out;
}

Kernel2D motion_kernel(double length, double angle_deg) {
    if (length < 1.0) throw std::invalid_argument("motion length must be >= 1");
    const int nsamples = std::max(1, static_cast<int>(std::ceil(length)));
    if (nsamples == 1) return Kernel2D::identity();

    const double half = (length - 1.0) * 0.5;
    const double theta = angle_deg * 3.14159265358979323846 / 180.0;
    const double dx = std::cos(theta);
    const double dy = std::sin(theta); // +y up; row index grows downward

    const int rx = static_cast<int>(std::ceil(half * std::abs(dx))) ;
    const int ry = static_cast<int>(std::ceil(half * std::abs(dy)));
    Kernel2D k(2 * rx + 1, 2 * ry + 1);

    for (int s = 0; s < nsamples; ++s) {
        const double t = -half + s * (2.0 * half / (nsamples - 1));
        const double px = t * dx + rx;
        const double py = -t * dy + ry;
        const int x0 = static_cast<int>(std::floor(px));
        const int y0 = static_cast<int>(std::floor(py));
        const double fx = px - x0;
        const double fy = py - y0;
        const double w[2][2] = {{(1 - fy) * (1 - fx), (1 - fy) * fx},
                                {fy * (1 - fx), fy * fx}};
        for (int jy = 0; jy < 2; ++jy)
            for (int jx = 0; jx < 2; ++jx) {
                const int yy = y0 + jy, xx = x0 + jx;
                if (yy >= 0 && yy < k.height && xx >= 0 && xx < k.width)
                    k.at(yy, xx) += w[jy][jx];
            }
    }
    const double s = k.sum();
    for (double& w : k.weights) w /= s;
    return k;
}

Kernel2D disk_kernel(double radius) {
    if (radius < 0.0) throw std::invalid_argument("disk radius must be >= 0");
    if (radius == 0.0) return Kernel2D::identity();

    const int r = static_cast<int>(std::ceil(radius));
    Kernel2D k(2 * r + 1, 2 * r + 1);
    constexpr int kSub = 32; // midpoint supersampling, symmetric grid
    const double r2 = radius * radius;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            int inside = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double py = y + (sy + 0.5) / kSub - 0.5;
                    const double px = x + (sx + 0.5) / kSub - 0.5;
                    if (px * px + py * py <= r2) ++inside;
                }
            k.at(y + r, x + r) = static_cast<double>(inside) / (kSub * kSub);
        }
    const double s = k.sum();
    if (s <= 0.0) return Kernel2D::identity();
    for (double& w : k.weights) w /= s;
    return k;
}

Kernel2D make_kernel(const BlurSpec& spec) {
    return spec.kind == BlurSpec::Kind::motion ? motion_kernel(spec.length, spec.angle)
                                               : disk_kernel(spec.radius);
}

Image apply_step(const Image& img, const Step& step, uint64_t seed) {
    if (const auto* blur = std::get_if<BlurSpec>(&step)) {
        const Kernel2D k = make_kernel(*blur);
        if (k.width == 1 && k.height == 1) return img; // identity blur
        return clamp01(convolve(img, k));
    }
    const auto& noise = std::get<NoiseSpec>(step);
    switch (noise.kind) {
        case NoiseSpec::Kind::awgn: return add_awgn(img, noise.sigma, seed);
        case NoiseSpec::Kind::speckle: return add_speckle(img, noise.sigma, seed);
        case NoiseSpec::Kind::salt_pepper: return add_salt_pepper(img, noise.p, seed);
        case NoiseSpec::Kind::poisson: return add_poisson(img, noise.peak, seed);
    }
    throw std::logic_error("unreachable noise kind");
}

Image apply_recipe(const Image& img, const DegradationRecipe& r) {
    Image out = img;
    for (size_t i = 0; i < r.steps.size(); ++i)
        out = apply_step(out, r.steps[i], derive_seed(r.master_seed, i));
    return out;
}

namespace {
nlohmann::json step_to_json(const Step& step) {
    nlohmann::json j;
    if (const auto* blur = std::get_if<BlurSpec>(&step)) {
        if (blur->kind == BlurSpec::Kind::motion) {
            j["kind"] = "motion";
            j["length"] = blur->length;
            j["angle"] = blur->angle;
        } else {
            j["kind"] = "disk";
            j["radius"] = blur->radius;
        }
        return j;
    }
    const auto& n = std::get<NoiseSpec>(step);
    switch (n.kind) {
        case NoiseSpec::Kind::awgn: j["kind"] = "awgn"; j["sigma"] = n.sigma; break;
        case NoiseSpec::Kind::speckle: j["kind"] = "speckle"; j["sigma"] = n.sigma; break;
        case NoiseSpec::Kind::salt_pepper: j["kind"] = "salt_pepper"; j["p"] = n.p; break;
        case NoiseSpec::Kind::poisson: j["kind"] = "poisson"; j["peak"] = n.peak; break;
    }
    return j;
}

Step step_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "motion") {
        BlurSpec b;
        b.kind = BlurSpec::Kind::motion;
        b.length = j.at("length").get<double>();
        b.angle = j.at("angle").get<double>();
        return b;
    }
    if (kind == "disk") {
        BlurSpec b;
        b.kind = BlurSpec::Kind::disk;
        b.radius = j.at("radius").get<double>();
        return b;
    }
    NoiseSpec n;
    if (kind == "awgn") {
        n.kind = NoiseSpec::Kind::awgn;
        n.sigma = j.at("sigma").get<double>();
    } else if (kind == "speckle") {
        n.kind = NoiseSpec::Kind::speckle;
        n.sigma = j.at("sigma").get<double>();
    } else if (kind == "salt_pepper") {
        n.kind = NoiseSpec::Kind::salt_pepper;
        n.p = j.at("p").get<double>();
    } else if (kind == "poisson") {
        n.kind = NoiseSpec::Kind::poisson;
        n.peak = j.at("peak").get<double>();
    } else {
        throw std::invalid_argument("unknown degradation step kind: " + kind);
    }
    return n;
}
} // namespace

std::string recipe_to_json(const DegradationRecipe& r) {
    nlohmann::json j;
    j["master_seed"] = r.master_seed;
    j["steps"] = nlohmann::json::array();
    for (const Step& s : r.steps) j["steps"].push_back(step_to_json(s));
    return j.dump();
}

DegradationRecipe recipe_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    DegradationRecipe r;
    r.master_seed = j.at("master_seed").get<uint64_t>();
    for (const auto& s : j.at("steps")) r.steps.push_back(step_from_json(s));
    return r;
}

} // namespace ir::degrade
