#include "ir/bench.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <omp.h>

#include "ir/nn/checkpoint.hpp"
#include "ir/nn/train.hpp"
#include "ir/rng.hpp"

namespace ir::bench {

void Manifest::validate() const {
    std::set<std::string> ids;
    for (const ManifestEntry& e : entries)
        if (!ids.insert(e.id).second)
            throw std::invalid_argument("duplicate manifest id: " + e.id);
}

void Manifest::save(const std::string& path) const {
    validate();
    std::ofstream f(path);
    if (!f) throw std::invalid_argument(path + ": cannot open manifest for writing");
    for (const ManifestEntry& e : entries) {
        nlohmann::json j;
        j["id"] = e.id;
        j["clean_path"] = e.clean_path;
        j["split"] = e.split;
        if (e.recipe) j["recipe"] = nlohmann::json::parse(degrade::recipe_to_json(*e.recipe));
        if (e.degraded_path) j["degraded_path"] = *e.degraded_path;
        f << j.dump() << "\n";
    }
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument(path + ": cannot open manifest");
    Manifest m;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.clean_path = j.at("clean_path").get<std::string>();
        e.split = j.value("split", "train");
        if (j.contains("recipe")) e.recipe = degrade::recipe_from_json(j["recipe"].dump());
        if (j.contains("degraded_path")) e.degraded_path = j["degraded_path"].get<std::string>();
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

std::optional<degrade::BlurSpec> BenchCell::blur() const {
    for (const degrade::Step& s : steps)
        if (const auto* b = std::get_if<degrade::BlurSpec>(&s)) return *b;
    return std::nullopt;
}

std::vector<BenchCell> default_grid() {
    using degrade::BlurSpec;
    using degrade::NoiseSpec;
    std::vector<BenchCell> grid;
    for (double sigma : {10.0, 20.0, 30.0, 40.0, 50.0, 60.0}) {
        NoiseSpec n;
        n.kind = NoiseSpec::Kind::awgn;
        n.sigma = sigma;
        grid.push_back({"awgn" + std::to_string(static_cast<int>(sigma)), {n}});
    }
    BlurSpec motion;
    motion.kind = BlurSpec::Kind::motion;
    motion.length = 9;
    motion.angle = 37.0;
    grid.push_back({"deblur", {motion}});

    NoiseSpec speckle;
    speckle.kind = NoiseSpec::Kind::speckle;
    speckle.sigma = 0.05;
    NoiseSpec sp;
    sp.kind = NoiseSpec::Kind::salt_pepper;
    sp.p = 0.01;
    NoiseSpec poisson;
    poisson.kind = NoiseSpec::Kind::poisson;
    poisson.peak = 500.0;
    grid.push_back({"composite", {motion, speckle, sp, poisson}});
    return grid;
}

std::vector<Aggregate> BenchResult::aggregates(const std::vector<MethodSpec>& methods,
                                               const std::vector<BenchCell>& grid) const {
    std::map<std::pair<std::string, std::string>, Aggregate> agg;
    for (const MethodSpec& m : methods)
        for (const BenchCell& c : grid)
            agg[{m.name, c.id}] = Aggregate{m.name, c.id, 0.0, 0.0, 0};
    for (const BenchRow& r : rows) {
        if (r.failed) continue;
        auto it = agg.find({r.method, r.cell_id});
        if (it == agg.end()) continue;
        it->second.mean_ssim += r.report.ssim;
        it->second.mean_psnr += r.report.psnr;
        it->second.count += 1;
    }
    std::vector<Aggregate> out;
    for (const MethodSpec& m : methods)
        for (const BenchCell& c : grid) {
            Aggregate a = agg.at({m.name, c.id});
            if (a.count > 0) {
                a.mean_ssim /= a.count;
                a.mean_psnr /= a.count;
            }
            out.push_back(a);
        }
    return out;
}

void apply_thread_cap_from_env() {
    const char* v = std::getenv("IR_THREADS");
    if (!v) return;
    const int n = std::atoi(v);
    if (n > 0) omp_set_num_threads(n);
}

BenchResult run_bench(const Manifest& manifest, const std::vector<MethodSpec>& methods,
                      const std::vector<BenchCell>& grid, uint64_t seed) {
    manifest.validate();
    if (grid.empty()) throw std::invalid_argument("benchmark grid is empty");
    if (methods.empty()) throw std::invalid_argument("benchmark method list is empty");

    // load checkpoints once; eval-mode forward has no interior mutability
    std::map<std::string, std::shared_ptr<nn::UNet>> models;
    for (const MethodSpec& m : methods)
        if (m.checkpoint_path && !models.count(*m.checkpoint_path))
            models[*m.checkpoint_path] =
                std::make_shared<nn::UNet>(nn::load_checkpoint(*m.checkpoint_path));

    std::vector<Image> cleans(manifest.entries.size());
    for (size_t i = 0; i < manifest.entries.size(); ++i)
        cleans[i] = load_image(manifest.entries[i].clean_path);

    const size_t n_img = manifest.entries.size();
    const size_t n_cell = grid.size();
    const size_t n_meth = methods.size();

    BenchResult result;
    result.rows.assign(n_img * n_cell * n_meth, BenchRow{});

    // (image, cell) tasks are independent; the derived seed makes the result
    // identical for any schedule or thread count
#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int64_t ii = 0; ii < static_cast<int64_t>(n_img); ++ii)
        for (int64_t ci = 0; ci < static_cast<int64_t>(n_cell); ++ci) {
            const Image& clean = cleans[ii];
            const BenchCell& cell = grid[ci];

            degrade::DegradationRecipe recipe;
            recipe.steps = cell.steps;
            recipe.master_seed = derive_seed(seed, static_cast<uint64_t>(ii) * 1000003u + ci);
            const Image degraded = degrade::apply_recipe(clean, recipe);

            const auto blur_spec = cell.blur();
            Kernel2D kernel;
            if (blur_spec) kernel = degrade::make_kernel(*blur_spec);

            for (size_t mi = 0; mi < n_meth; ++mi) {
                BenchRow& row =
                    result.rows[(static_cast<size_t>(ii) * n_cell + ci) * n_meth + mi];
                row.image_id = manifest.entries[ii].id;
                row.method = methods[mi].name;
                row.cell_id = cell.id;
                try {
                    Image restored;
                    if (methods[mi].checkpoint_path) {
                        restored = nn::restore(*models.at(*methods[mi].checkpoint_path),
                                               degraded);
                    } else {
                        restored = classical::restore(degraded, methods[mi].classical,
                                                      blur_spec ? &kernel : nullptr);
                    }
                    row.report = metrics::evaluate(restored, clean);
                } catch (const std::exception& e) {
                    row.failed = true;
                    row.error = e.what();
                }
            }
        }
    return result;
}

void write_rows_csv(const BenchResult& result, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument(path + ": cannot open CSV for writing");
    f << "image_id,method,degradation_id,psnr_db,ssim,mse,edge_loss\n";
    for (const BenchRow& r : result.rows) {
        if (r.failed) continue;
        f << r.image_id << ',' << r.method << ',' << r.cell_id << ','
          << metrics::format_metric(r.report.psnr) << ','
          << metrics::format_metric(r.report.ssim) << ','
          << metrics::format_metric(r.report.mse) << ','
          << metrics::format_metric(r.report.edge_loss) << "\n";
    }
}

namespace {
std::string markdown_from_aggregates(const std::vector<Aggregate>& aggs,
                                     const std::vector<std::string>& methods,
                                     const std::vector<std::string>& cells) {
    std::map<std::pair<std::string, std::string>, const Aggregate*> lookup;
    for (const Aggregate& a : aggs) lookup[{a.method, a.cell_id}] = &a;

    std::ostringstream out;
    out << "| method |";
    for (const std::string& c : cells) out << " " << c << " SSIM | " << c << " PSNR |";
    out << "\n|---|";
    for (size_t i = 0; i < cells.size(); ++i) out << "---|---|";
    out << "\n";
    for (const std::string& m : methods) {
        out << "| " << m << " |";
        for (const std::string& c : cells) {
            const Aggregate* a = lookup.count({m, c}) ? lookup.at({m, c}) : nullptr;
            if (a && a->count > 0)
                out << " " << metrics::format_metric(a->mean_ssim) << " | "
                    << metrics::format_metric(a->mean_psnr) << " |";
            else
                out << " n/a | n/a |";
        }
        out << "\n";
    }
    return out.str();
}
} // namespace

std::string markdown_report(const BenchResult& result, const std::vector<MethodSpec>& methods,
                            const std::vector<BenchCell>& grid) {
    if (result.rows.empty()) throw std::invalid_argument("empty benchmark result");
    std::vector<std::string> mnames, cnames;
    for (const MethodSpec& m : methods) mnames.push_back(m.name);
    for (const BenchCell& c : grid) cnames.push_back(c.id);
    return markdown_from_aggregates(result.aggregates(methods, grid), mnames, cnames);
}

std::string markdown_report_from_csv(const std::string& csv_path) {
    std::ifstream f(csv_path);
    if (!f) throw std::invalid_argument(csv_path + ": cannot open CSV");
    std::string line;
    if (!std::getline(f, line)) throw std::invalid_argument(csv_path + ": empty CSV");

    std::map<std::pair<std::string, std::string>, Aggregate> agg;
    std::vector<std::string> methods, cells;
    auto remember = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string image_id, method, cell, psnr_s, ssim_s;
        std::getline(ss, image_id, ',');
        std::getline(ss, method, ',');
        std::getline(ss, cell, ',');
        std::getline(ss, psnr_s, ',');
        std::getline(ss, ssim_s, ',');
        remember(methods, method);
        remember(cells, cell);
        Aggregate& a = agg.try_emplace({method, cell}, Aggregate{method, cell}).first->second;
        a.mean_psnr += psnr_s == "inf" ? std::numeric_limits<double>::infinity()
                                       : std::stod(psnr_s);
        a.mean_ssim += std::stod(ssim_s);
        a.count += 1;
    }
    std::vector<Aggregate> aggs;
    for (auto& [key, a] : agg) {
        if (a.count > 0) {
            a.mean_ssim /= a.count;
            a.mean_psnr /= a.count;
        }
        aggs.push_back(a);
    }
    return markdown_from_aggregates(aggs, methods, cells);
}

} // namespace ir::bench
