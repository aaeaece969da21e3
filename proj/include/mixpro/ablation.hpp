#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixpro/manifest.hpp"
#include "mixpro/task.hpp"
#include "mixpro/train.hpp"

namespace mixpro {

struct CellResult {
    std::string variant;
    std::uint64_t seed = 0;
    // Unweighted mean over the task's template set of single-template dev
    // evaluations, so every variant is scored on the same metric.
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double final_loss = 0.0;
    std::vector<double> per_template_accuracy;
    std::int64_t forward_passes = 0;
    std::vector<std::int64_t> template_usage;
    std::size_t param_count = 0;
    // Non-empty when the cell failed; metric fields are then meaningless.
    std::string error;
};

struct VariantAggregate {
    std::string variant;
    std::size_t seeds = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double macro_f1_mean = 0.0;
    double macro_f1_std = 0.0;
    double final_loss_mean = 0.0;
    double final_loss_std = 0.0;
};

struct RunReport {
    std::vector<CellResult> cells;
    std::vector<VariantAggregate> aggregates;

    std::vector<std::string> failures() const;
    const VariantAggregate& aggregate(const std::string& variant) const;
};

// Trains one (variant, seed) cell on the task and scores it on dev. The run's
// text augmentations are drawn from the seed's "augment" stream, matching the
// dump command at the same seed.
CellResult run_cell(const SyntheticTask& task, const ModelConfig& model_config,
                    const TrainingConfig& base_config, Variant variant, std::uint64_t seed);

// Runs every (variant, seed) cell, optionally across jobs threads. Failures
// are captured per cell; surviving cells still aggregate (sample std over
// seeds, 0 when fewer than two).
RunReport run_ablation(const SyntheticTask& task, const ModelConfig& model_config,
                       const TrainingConfig& base_config, const std::vector<Variant>& variants,
                       const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

void write_report_csv(const RunReport& report, const std::string& path);
void write_report_json(const RunReport& report, const RunManifest& manifest, const std::string& path);
RunReport load_report_json(const std::string& path);
void write_plot_data(const RunReport& report, const std::string& csv_path,
                     const std::string& json_path);

// Shortest representation that round-trips a double, for text outputs.
std::string format_double(double value);

}  // namespace mixpro
