#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "omnigaze/data.hpp"
#include "omnigaze/nets.hpp"
#include "omnigaze/pipeline.hpp"

namespace omnigaze {

struct EvalReport {
    std::string dataset;
    size_t count = 0;
    float mean_deg = 0.0f;
    std::array<float, 9> decile_deg{};  // p10..p90 of the per-sample error
    uint64_t config_hash = 0;
    uint64_t seed = 0;
};

// Mean angular error of the model over a labeled dataset (for synthetic
// unlabeled pools, pass the oracle dataset).
EvalReport evaluate(GazeEstimatorParams& model, const Dataset& labeled_or_oracle,
                    uint64_t config_hash = 0, uint64_t seed = 0);

// Rank-based (Mann-Whitney) AUC with clean as the positive class; ties count
// half. Throws InvalidArgument unless both classes are present.
double discrimination_auc(std::span<const float> scores, const std::vector<bool>& clean_mask);

// One ablation configuration: a named set of overrides on the base config.
struct AblationCell {
    std::string name;
    std::optional<float> weight_sup, weight_unsup;
    std::optional<bool> filtering, reweighting;
    std::optional<ConfidenceVariant> confidence_variant;
    std::optional<bool> refresh_enabled;
    std::optional<int> refresh_interval;

    TrainConfig apply(TrainConfig base) const;
};

// baseline (labeled only) / nofilter (+unlabeled, no selection) /
// full (+selection).
std::vector<AblationCell> default_grid();
std::vector<AblationCell> parse_grid_json(const std::string& text);

struct AblationRow {
    std::string config;
    uint64_t seed = 0;
    float mean_deg = 0.0f;
    std::optional<float> sd_deg;  // set on summary rows
    uint64_t n = 0;
    std::optional<float> retained_fraction_final;
    bool failed = false;
    std::string error;
};

struct AblationTable {
    std::vector<AblationRow> rows;      // one per config x seed
    std::vector<AblationRow> summary;   // one per config: seed-mean and sd
};

// Runs run_selftraining per cell per seed, evaluating the final student on
// eval_oracle. A failing cell is recorded and does not abort the others.
AblationTable run_ablation(const std::vector<AblationCell>& grid, const Dataset& labeled,
                           const Dataset& unlabeled, const Dataset& eval_oracle,
                           const TrainConfig& base, const std::vector<uint64_t>& seeds,
                           CueProvider& cues, int jobs = 1);

enum class ReportFormat { json, csv, markdown };

// Stable field order; JSON is the source of truth, CSV/markdown derived.
void write_report(const std::vector<AblationRow>& rows, const std::string& path,
                  ReportFormat format);
std::string report_json(const std::vector<AblationRow>& rows);
std::string eval_report_json(const EvalReport& r);

}  // namespace omnigaze
