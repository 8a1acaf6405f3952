// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, presets, run orchestration and cross-run comparison.
//
// A configuration is a JSON document. It is resolved in three layers, later
// layers winning: the named preset, the config file, then command-line
// overrides given as dotted keys (`schedule.beta=0.5`).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "growprune/async_sim.hpp"
#include "growprune/data.hpp"
#include "growprune/model.hpp"
#include "growprune/optimizer.hpp"
#include "growprune/scheduler.hpp"

namespace growprune {

struct DataConfig {
    std::string source = "synthetic";  // "synthetic" or "criteo"
    std::filesystem::path path;        // criteo TSV
    /// Synthetic stream lengths. test_samples == 0 holds out train_samples / 6,
    /// i.e. the final 1/7 of the combined stream.
    std::uint64_t train_samples = 100000;
    std::uint64_t test_samples = 0;
    /// Criteo: rows read from the start of the file (0 reads all of it); the
    /// final test_fraction of them is held out.
    std::uint64_t max_rows = 0;
    double test_fraction = 1.0 / 7.0;
    DriftSpec drift;
};

struct ScheduleConfig {
    std::string scheme = "baseline";
    double beta = 0.7;
    double sparse_fraction = 0.4;
    /// Explicit sparse intervals for the alternate scheme.
    std::vector<std::pair<double, double>> sparse_intervals;
    double initial_fraction = 1.0;
    double warmup = 0.1;
    /// Initial fractions run by an initial_capacity sweep.
    std::vector<double> sweep;
};

struct AsyncConfig {
    bool enabled = false;
    std::size_t workers = 1;
    std::int64_t staleness = 0;
    bool growth_barrier = true;
    std::string growth_init = "zero";  // "zero" or "constant"
    double growth_constant = 0.1;
};

struct RunConfig {
    std::string preset;
    ModelConfig model;
    OptimizerConfig optimizer;
    DataConfig data;
    ScheduleConfig schedule;
    std::vector<std::string> prunable_layers;
    std::size_t score_window_batches = 100;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
    std::uint64_t window_size = 0;  // 0: 1/20 of the training stream
    std::filesystem::path output_dir = "runs/run";
    /// Baseline run directory (or its summary.json) for relative metrics.
    std::filesystem::path baseline;
    AsyncConfig async;

    /// Throws ConfigError on any inconsistency.
    void validate() const;
    [[nodiscard]] PhasePlan plan() const;
    [[nodiscard]] TrainOptions train_options(std::uint64_t total_samples) const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Strict: unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& c);

[[nodiscard]] std::vector<std::string> preset_names();
/// The JSON patch a preset applies on top of the defaults.
[[nodiscard]] nlohmann::json preset(const std::string& name);

/// Sets `dotted.key=value`. The value is parsed as JSON and taken as a plain
/// string when that fails.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults <- preset <- file document <- overrides. The preset is taken from
/// the overrides when given there, else from the file.
RunConfig resolve_config(const nlohmann::json& file, const std::vector<std::string>& overrides);
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

struct RunOutcome {
    std::filesystem::path dir;
    nlohmann::json summary;
};

/// Trains per the config and writes config.json, events.jsonl, metrics.csv,
/// summary.json and final.ckpt (plus trace.csv for async runs) to the output
/// directory, which must not already hold a run.
RunOutcome run(const RunConfig& config);

/// Runs an initial_capacity sweep: one sub-run per entry of schedule.sweep in
/// <output_dir>/cap_<percent>, then sweep.csv and sweep.json.
std::vector<RunOutcome> run_sweep(const RunConfig& config);

/// run() or run_sweep(), whichever the config asks for.
std::vector<RunOutcome> execute(const RunConfig& config);

/// Average-rank Spearman correlation.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ComparisonRow {
    std::string run;
    std::string scheme;
    double beta = 0.0;
    double sparse_fraction = 0.0;
    double test_accuracy = 0.0;
    double relative_accuracy = 0.0;  // percent
    bool significant = false;
    double test_ce = 0.0;
    double relative_ce = 0.0;  // percent
    std::uint64_t flops = 0;
    double relative_flops = 0.0;  // percent
};

struct Comparison {
    std::vector<ComparisonRow> rows;  // baseline first
    /// Runs of the four comparison schemes grouped by (beta, sparse_fraction)
    /// all share one FLOPs total.
    bool equal_flops = true;
    std::vector<std::string> flops_mismatches;

    [[nodiscard]] nlohmann::json to_json() const;
    void write_csv(std::ostream& out) const;
};

/// Reads archived runs. Throws DataError when a run is missing or was made
/// under different data, seed or stream length than the baseline.
Comparison compare(const std::filesystem::path& baseline, const std::vector<std::filesystem::path>& runs);

/// Checkpoint description plus a `dense` flag.
nlohmann::json inspect_checkpoint(const std::filesystem::path& path);

}  // namespace growprune
