#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ir/bench.hpp"
#include "ir/classical.hpp"
#include "ir/color.hpp"
#include "ir/degrade.hpp"
#include "ir/image.hpp"
#include "ir/metrics.hpp"
#include "ir/nn/checkpoint.hpp"
#include "ir/nn/train.hpp"
#include "ir/rng.hpp"

namespace {

using namespace ir;

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, double> out;
    for (const std::string& kv : kvs) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--param", "expected key=value, got '" + kv + "'");
        out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    return out;
}

degrade::BlurSpec parse_motion(const std::string& s) {
    degrade::BlurSpec b;
    b.kind = degrade::BlurSpec::Kind::motion;
    if (std::sscanf(s.c_str(), "%lf,%lf", &b.length, &b.angle) != 2)
        throw CLI::ValidationError("--motion", "expected LENGTH,ANGLE");
    return b;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

void print_config(const std::string& cmd, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cout << "[" << cmd << "]";
    for (const auto& [k, v] : kv) std::cout << " " << k << "=" << v;
    std::cout << "\n";
}

// default degradation used by `train` when a manifest entry has no recipe:
// motion blur then AWGN 25, per Eq-1-style blur-before-noise ordering
degrade::DegradationRecipe default_train_recipe(uint64_t seed) {
    degrade::BlurSpec blur;
    blur.kind = degrade::BlurSpec::Kind::motion;
    blur.length = 9;
    blur.angle = 37.0;
    degrade::NoiseSpec noise;
    noise.kind = degrade::NoiseSpec::Kind::awgn;
    noise.sigma = 25.0;
    return degrade::DegradationRecipe::blur_noise(blur, noise, seed);
}

int run(int argc, char** argv) {
    CLI::App app{"surgical-endoscopy-style image degradation, restoration and benchmarking"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus + manifest");
    int synth_n = 20, synth_size = 128;
    uint64_t synth_seed = 1;
    std::string synth_out = "corpus";
    synth->add_option("--n", synth_n, "image count");
    synth->add_option("--size", synth_size, "image size (divisible by 16)");
    synth->add_option("--seed", synth_seed, "corpus seed");
    synth->add_option("--out", synth_out, "output directory");

    // ---- degrade ----
    auto* deg = app.add_subcommand("degrade", "apply a degradation recipe to an image");
    std::string deg_in, deg_out, deg_recipe_json;
    uint64_t deg_seed = 0;
    double deg_awgn = -1, deg_speckle = -1, deg_sp = -1, deg_poisson = -1, deg_disk = -1;
    std::string deg_motion;
    deg->add_option("--in", deg_in, "input image")->required();
    deg->add_option("--out", deg_out, "output image")->required();
    deg->add_option("--seed", deg_seed, "master seed");
    deg->add_option("--recipe", deg_recipe_json, "full recipe as one-line JSON");
    deg->add_option("--motion", deg_motion, "motion blur LENGTH,ANGLE");
    deg->add_option("--disk", deg_disk, "disk blur radius");
    deg->add_option("--awgn", deg_awgn, "AWGN sigma (8-bit units)");
    deg->add_option("--speckle", deg_speckle, "speckle sigma");
    deg->add_option("--salt-pepper", deg_sp, "salt-pepper probability");
    deg->add_option("--poisson", deg_poisson, "poisson peak");

    // ---- restore ----
    auto* res = app.add_subcommand("restore", "run one restoration method on an image");
    std::string res_in, res_out, res_method = "gaussian", res_ckpt, res_motion;
    double res_disk = -1;
    std::vector<std::string> res_params;
    res->add_option("--in", res_in)->required();
    res->add_option("--out", res_out)->required();
    res->add_option("--method", res_method,
                    "identity|gaussian|bilateral|nlm|anisotropic|tv|rl|wiener|unet");
    res->add_option("--param", res_params, "method parameter key=value")->take_all();
    res->add_option("--checkpoint", res_ckpt, "checkpoint for --method unet");
    res->add_option("--kernel-motion", res_motion, "known blur kernel LENGTH,ANGLE");
    res->add_option("--kernel-disk", res_disk, "known blur kernel radius");

    // ---- wb ----
    auto* wb = app.add_subcommand("wb", "white balance / color pipeline");
    std::string wb_in, wb_out, wb_est = "grayworld", wb_matrix;
    double wb_pct = 1.0;
    bool wb_srgb = false;
    wb->add_option("--in", wb_in)->required();
    wb->add_option("--out", wb_out)->required();
    wb->add_option("--estimator", wb_est, "grayworld|whitepatch|none");
    wb->add_option("--percentile", wb_pct, "white-patch percentile in (0,1]");
    wb->add_option("--matrix", wb_matrix, "raw->XYZ matrix file (9 decimals)");
    wb->add_flag("--srgb", wb_srgb, "apply the sRGB transfer curve");

    // ---- metrics ----
    auto* met = app.add_subcommand("metrics", "score a test image against a reference");
    std::string met_ref, met_test, met_csv;
    met->add_option("--ref", met_ref)->required();
    met->add_option("--test", met_test)->required();
    met->add_option("--csv", met_csv, "append a CSV row to this file");

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train the residual UNet restorer");
    std::string tr_manifest, tr_out = "model.ckpt", tr_history = "history.csv";
    std::string tr_stages = "coarse";
    int tr_steps = 500, tr_fine_steps = 200, tr_batch = 2, tr_patch = 64, tr_width = 16;
    int tr_patches_per_image = 4;
    double tr_lr = 1e-4;
    uint64_t tr_seed = 1;
    tr->add_option("--manifest", tr_manifest, "manifest.jsonl of clean images")->required();
    tr->add_option("--out", tr_out, "checkpoint path");
    tr->add_option("--history", tr_history, "loss history CSV");
    tr->add_option("--stages", tr_stages, "coarse | coarse,fine");
    tr->add_option("--steps", tr_steps, "coarse-stage steps");
    tr->add_option("--fine-steps", tr_fine_steps, "fine-stage steps");
    tr->add_option("--batch", tr_batch);
    tr->add_option("--patch", tr_patch, "training patch size (divisible by 16)");
    tr->add_option("--patches-per-image", tr_patches_per_image);
    tr->add_option("--base-width", tr_width);
    tr->add_option("--lr", tr_lr);
    tr->add_option("--seed", tr_seed);

    // ---- bench ----
    auto* ben = app.add_subcommand("bench", "degradation x restoration benchmark matrix");
    std::string ben_manifest, ben_out = "report", ben_methods = "identity,gaussian,tv";
    std::string ben_grid = "default", ben_ckpt;
    int ben_synth = 0, ben_size = 128;
    uint64_t ben_seed = 1;
    ben->add_option("--manifest", ben_manifest, "existing manifest.jsonl");
    ben->add_option("--synth", ben_synth, "generate N synthetic images instead");
    ben->add_option("--size", ben_size, "synthetic image size");
    ben->add_option("--methods", ben_methods, "comma-separated method list");
    ben->add_option("--grid", ben_grid, "degradation grid (default)");
    ben->add_option("--checkpoint", ben_ckpt, "adds a 'unet' method using this checkpoint");
    ben->add_option("--out", ben_out, "output directory");
    ben->add_option("--seed", ben_seed);

    // ---- report ----
    auto* rep = app.add_subcommand("report", "re-aggregate a rows CSV into markdown");
    std::string rep_in, rep_out, rep_fmt = "markdown";
    rep->add_option("--in", rep_in)->required();
    rep->add_option("--out", rep_out, "output file (stdout when omitted)");
    rep->add_option("--fmt", rep_fmt, "markdown|csv");

    CLI11_PARSE(app, argc, argv);
    bench::apply_thread_cap_from_env();

    if (synth->parsed()) {
        print_config("synth", {{"n", std::to_string(synth_n)},
                               {"size", std::to_string(synth_size)},
                               {"seed", std::to_string(synth_seed)},
                               {"out", synth_out}});
        bench::synth_corpus(synth_n, synth_size, synth_seed, synth_out);
        std::cout << "wrote " << synth_n << " images + manifest to " << synth_out << "\n";
        return 0;
    }

    if (deg->parsed()) {
        degrade::DegradationRecipe recipe;
        if (!deg_recipe_json.empty()) {
            recipe = degrade::recipe_from_json(deg_recipe_json);
        } else {
            recipe.master_seed = deg_seed;
            if (!deg_motion.empty()) recipe.steps.push_back(parse_motion(deg_motion));
            if (deg_disk >= 0) {
                degrade::BlurSpec b;
                b.kind = degrade::BlurSpec::Kind::disk;
                b.radius = deg_disk;
                recipe.steps.push_back(b);
            }
            auto noise = [&](degrade::NoiseSpec::Kind k, double sigma, double p, double peak) {
                degrade::NoiseSpec n;
                n.kind = k;
                n.sigma = sigma;
                n.p = p;
                n.peak = peak;
                recipe.steps.push_back(n);
            };
            if (deg_awgn >= 0) noise(degrade::NoiseSpec::Kind::awgn, deg_awgn, 0, 0);
            if (deg_speckle >= 0) noise(degrade::NoiseSpec::Kind::speckle, deg_speckle, 0, 0);
            if (deg_sp >= 0) noise(degrade::NoiseSpec::Kind::salt_pepper, 0, deg_sp, 0);
            if (deg_poisson > 0) noise(degrade::NoiseSpec::Kind::poisson, 0, 0, deg_poisson);
        }
        print_config("degrade", {{"in", deg_in},
                                 {"out", deg_out},
                                 {"recipe", degrade::recipe_to_json(recipe)}});
        save_image(degrade::apply_recipe(load_image(deg_in), recipe), deg_out);
        return 0;
    }

    if (res->parsed()) {
        const Image input = load_image(res_in);
        Image output;
        if (res_method == "unet") {
            if (res_ckpt.empty())
                throw CLI::ValidationError("--checkpoint", "required for --method unet");
            print_config("restore", {{"in", res_in}, {"method", "unet"}, {"checkpoint", res_ckpt}});
            nn::UNet model = nn::load_checkpoint(res_ckpt);
            output = nn::restore(model, input);
        } else {
            classical::RestoreConfig cfg;
            cfg.method = res_method;
            cfg.params = parse_params(res_params);
            Kernel2D kernel = Kernel2D::identity();
            bool have_kernel = false;
            if (!res_motion.empty()) {
                const auto spec = parse_motion(res_motion);
                kernel = degrade::make_kernel(spec);
                have_kernel = true;
            } else if (res_disk >= 0) {
                kernel = degrade::disk_kernel(res_disk);
                have_kernel = true;
            }
            std::ostringstream ps;
            for (const auto& [k, v] : cfg.params) ps << k << "=" << v << ";";
            print_config("restore", {{"in", res_in}, {"method", res_method}, {"params", ps.str()}});
            output = classical::restore(input, cfg, have_kernel ? &kernel : nullptr);
        }
        save_image(output, res_out);
        return 0;
    }

    if (wb->parsed()) {
        const Image input = load_image(wb_in);
        color::ColorPipeline pipeline;
        if (wb_est == "grayworld") pipeline = color::estimate_wb_grayworld(input);
        else if (wb_est == "whitepatch") pipeline = color::estimate_wb_whitepatch(input, wb_pct);
        else if (wb_est != "none")
            throw CLI::ValidationError("--estimator", "unknown estimator " + wb_est);
        if (!wb_matrix.empty()) pipeline.raw_to_xyz = color::load_matrix(wb_matrix);
        pipeline.srgb_encode = wb_srgb;
        print_config("wb", {{"in", wb_in},
                            {"estimator", wb_est},
                            {"gains", std::to_string(pipeline.wb_gains[0]) + "," +
                                          std::to_string(pipeline.wb_gains[1]) + "," +
                                          std::to_string(pipeline.wb_gains[2])},
                            {"srgb", wb_srgb ? "on" : "off"}});
        save_image(color::apply_pipeline(input, pipeline), wb_out);
        return 0;
    }

    if (met->parsed()) {
        const Image ref = load_image(met_ref);
        const Image test = load_image(met_test);
        print_config("metrics", {{"ref", met_ref}, {"test", met_test}});
        const metrics::MetricReport r = metrics::evaluate(test, ref);
        std::cout << "psnr=" << metrics::format_metric(r.psnr)
                  << " ssim=" << metrics::format_metric(r.ssim)
                  << " mse=" << metrics::format_metric(r.mse)
                  << " edge_loss=" << metrics::format_metric(r.edge_loss) << "\n";
        if (!met_csv.empty()) {
            std::ofstream f(met_csv, std::ios::app);
            f << met_test << ",metrics," << met_ref << ',' << metrics::format_metric(r.psnr)
              << ',' << metrics::format_metric(r.ssim) << ',' << metrics::format_metric(r.mse)
              << ',' << metrics::format_metric(r.edge_loss) << "\n";
        }
        return 0;
    }

    if (tr->parsed()) {
        print_config("train", {{"manifest", tr_manifest},
                               {"stages", tr_stages},
                               {"steps", std::to_string(tr_steps)},
                               {"fine_steps", std::to_string(tr_fine_steps)},
                               {"batch", std::to_string(tr_batch)},
                               {"patch", std::to_string(tr_patch)},
                               {"base_width", std::to_string(tr_width)},
                               {"lr", std::to_string(tr_lr)},
                               {"seed", std::to_string(tr_seed)}});
        const bench::Manifest manifest = bench::Manifest::load(tr_manifest);

        // Coarse corpus: all degradations; fine corpus: blur-only pairs.
        std::vector<nn::TrainSample> coarse_corpus, fine_corpus;
        size_t idx = 0;
        for (const bench::ManifestEntry& e : manifest.entries) {
            if (e.split != "train") { ++idx; continue; }
            const Image clean = load_image(e.clean_path);
            const uint64_t img_seed = derive_seed(tr_seed, idx);
            const degrade::DegradationRecipe recipe =
                e.recipe ? *e.recipe : default_train_recipe(img_seed);
            const Image degraded = degrade::apply_recipe(clean, recipe);

            degrade::DegradationRecipe blur_only;
            blur_only.master_seed = img_seed;
            for (const auto& s : recipe.steps)
                if (std::holds_alternative<degrade::BlurSpec>(s)) blur_only.steps.push_back(s);
            const Image blurred =
                blur_only.steps.empty() ? degraded : degrade::apply_recipe(clean, blur_only);

            const auto clean_patches =
                extract_patches(clean, tr_patch, tr_patch / 2, img_seed, tr_patches_per_image);
            const auto deg_patches =
                extract_patches(degraded, tr_patch, tr_patch / 2, img_seed, tr_patches_per_image);
            const auto blur_patches =
                extract_patches(blurred, tr_patch, tr_patch / 2, img_seed, tr_patches_per_image);
            for (int p = 0; p < tr_patches_per_image; ++p) {
                coarse_corpus.push_back({deg_patches[p], clean_patches[p]});
                fine_corpus.push_back({blur_patches[p], clean_patches[p]});
            }
            ++idx;
        }
        if (coarse_corpus.empty()) throw std::runtime_error("no train-split entries in manifest");

        nn::UNet model(tr_width, tr_seed);
        nn::AdamState opt;
        nn::TrainConfig cfg;
        cfg.base_width = tr_width;
        cfg.lr = tr_lr;
        cfg.batch = tr_batch;
        cfg.seed = tr_seed;

        std::vector<nn::HistoryRow> history;
        const auto stages = split_csv(tr_stages);
        for (const std::string& stage : stages) {
            if (stage == "coarse") {
                cfg.stage = nn::Stage::coarse;
                auto h = nn::train_stage(model, opt, coarse_corpus, cfg, tr_steps);
                history.insert(history.end(), h.begin(), h.end());
            } else if (stage == "fine") {
                cfg.stage = nn::Stage::fine;
                auto h = nn::train_stage(model, opt, fine_corpus, cfg, tr_fine_steps);
                history.insert(history.end(), h.begin(), h.end());
            } else {
                throw CLI::ValidationError("--stages", "unknown stage " + stage);
            }
        }
        nn::write_history_csv(history, tr_history);
        nn::save_checkpoint(model, tr_out, &opt);
        std::cout << "wrote checkpoint " << tr_out << " and history " << tr_history << "\n";
        return 0;
    }

    if (ben->parsed()) {
        std::filesystem::create_directories(ben_out);
        bench::Manifest manifest;
        if (ben_synth > 0)
            manifest = bench::synth_corpus(ben_synth, ben_size, ben_seed, ben_out + "/corpus");
        else if (!ben_manifest.empty())
            manifest = bench::Manifest::load(ben_manifest);
        else
            throw CLI::ValidationError("--manifest", "need --manifest or --synth N");

        if (ben_grid != "default")
            throw CLI::ValidationError("--grid", "only the 'default' grid is defined");
        const auto grid = bench::default_grid();

        std::vector<bench::MethodSpec> methods;
        for (const std::string& name : split_csv(ben_methods)) {
            bench::MethodSpec m;
            m.name = name;
            m.classical.method = name;
            methods.push_back(std::move(m));
        }
        if (!ben_ckpt.empty()) {
            bench::MethodSpec m;
            m.name = "unet";
            m.checkpoint_path = ben_ckpt;
            methods.push_back(std::move(m));
        }

        print_config("bench", {{"images", std::to_string(manifest.entries.size())},
                               {"methods", ben_methods + (ben_ckpt.empty() ? "" : ",unet")},
                               {"grid", ben_grid},
                               {"cells", std::to_string(grid.size())},
                               {"seed", std::to_string(ben_seed)},
                               {"out", ben_out}});

        const bench::BenchResult result = bench::run_bench(manifest, methods, grid, ben_seed);
        bench::write_rows_csv(result, ben_out + "/results.csv");
        std::ofstream md(ben_out + "/report.md");
        md << bench::markdown_report(result, methods, grid);
        size_t failures = 0;
        for (const auto& r : result.rows) failures += r.failed ? 1 : 0;
        std::cout << "rows=" << result.rows.size() - failures << " failures=" << failures
                  << " -> " << ben_out << "/results.csv\n";
        for (const auto& r : result.rows)
            if (r.failed)
                std::cerr << "row error: " << r.image_id << "/" << r.method << "/" << r.cell_id
                          << ": " << r.error << "\n";
        return 0;
    }

    if (rep->parsed()) {
        print_config("report", {{"in", rep_in}, {"fmt", rep_fmt}});
        if (rep_fmt != "markdown")
            throw CLI::ValidationError("--fmt", "only markdown re-aggregation is implemented");
        const std::string md = bench::markdown_report_from_csv(rep_in);
        if (rep_out.empty()) {
            std::cout << md;
        } else {
            std::ofstream f(rep_out);
            f << md;
        }
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
