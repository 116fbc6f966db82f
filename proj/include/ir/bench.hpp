#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ir/classical.hpp"
#include "ir/degrade.hpp"
#include "ir/image.hpp"
#include "ir/metrics.hpp"

namespace ir::nn { class UNet; }

namespace ir::bench {

// Line-delimited JSON manifest; one entry per clean image.
struct ManifestEntry {
    std::string id;
    std::string clean_path;
    std::string split; // train | val | test
    std::optional<degrade::DegradationRecipe> recipe;
    std::optional<std::string> degraded_path;
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    void save(const std::string& path) const;
    static Manifest load(const std::string& path);
    void validate() const; // unique ids
};

// Procedural stand-in scene: illumination gradient + soft blobs +
// band-limited texture + a few specular dots, with a per-channel color cast.
// Deterministic in (size, seed).
Image synth_scene(int size, uint64_t seed);

// Generates n scenes, saves them under out_dir as PNG, writes
// out_dir/manifest.jsonl with a 75/25 train/val split.
Manifest synth_corpus(int n, int size, uint64_t seed, const std::string& out_dir);

// One degradation column of the benchmark matrix.
struct BenchCell {
    std::string id;
    std::vector<degrade::Step> steps;

    // blur kernel handed to deconvolution methods, if the cell blurs
    std::optional<degrade::BlurSpec> blur() const;
};

// Table-shaped default: AWGN sigma 10..60, one motion-blur deblur column,
// one composite speckle+salt-pepper+poisson+blur column.
std::vector<BenchCell> default_grid();

struct MethodSpec {
    std::string name;                  // row label
    classical::RestoreConfig classical; // used unless checkpoint_path set
    std::optional<std::string> checkpoint_path; // neural restorer
};

struct BenchRow {
    std::string image_id;
    std::string method;
    std::string cell_id;
    metrics::MetricReport report;
    bool failed = false;
    std::string error;
};

struct Aggregate {
    std::string method;
    std::string cell_id;
    double mean_ssim = 0.0;
    double mean_psnr = 0.0;
    int count = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    // recomputed from rows; rows with failures or infinite PSNR noted below
    std::vector<Aggregate> aggregates(const std::vector<MethodSpec>& methods,
                                      const std::vector<BenchCell>& grid) const;
};

// Degrades each manifest image per grid cell (seed derived from
// (seed, image index, cell index)), runs every method, scores against the
// clean image. (image, cell) tasks run in parallel; per-task seeds make the
// schedule irrelevant to the output. Method failures are recorded per row.
BenchResult run_bench(const Manifest& manifest, const std::vector<MethodSpec>& methods,
                      const std::vector<BenchCell>& grid, uint64_t seed);

// CSV rows: image_id,method,degradation_id,psnr_db,ssim,mse,edge_loss
// (failed rows are omitted; aggregates recomputed at emit time).
void write_rows_csv(const BenchResult& result, const std::string& path);

// methods as rows, cells as SSIM/PSNR column pairs
std::string markdown_report(const BenchResult& result, const std::vector<MethodSpec>& methods,
                            const std::vector<BenchCell>& grid);

// Re-aggregates an existing rows CSV (the `report` subcommand).
std::string markdown_report_from_csv(const std::string& csv_path);

// IR_THREADS env var: 0 or unset = auto, otherwise caps OpenMP threads.
void apply_thread_cap_from_env();

} // namespace ir::bench
