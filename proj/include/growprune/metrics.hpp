// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "growprune/model.hpp"

namespace growprune {

struct EvalResult {
    double ce = 0.0;        // mean clamped BCE
    double accuracy = 0.0;  // threshold 0.5
    std::uint64_t samples = 0;
    std::uint64_t correct = 0;
    double positives = 0.0;
};

/// Forward-only evaluation. When `losses` is given, per-sample BCE terms are
/// appended to it.
template <typename T>
EvalResult evaluate(const BasicModelState<T>& state, std::span<const MiniBatch> batches,
                    std::vector<double>* losses = nullptr);

struct WindowRange {
    std::size_t index = 0;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    bool truncated = false;  // shorter than the requested size
};

/// Contiguous, non-overlapping windows covering [0, total). Zero size is an error.
std::vector<WindowRange> plan_windows(std::uint64_t total, std::uint64_t window_size);

/// Mean model BCE divided by the BCE of a constant predictor emitting the
/// label base rate of the same stream. Throws for a base rate of 0 or 1.
double normalized_ce(std::span<const double> losses, std::span<const float> labels);

inline constexpr double kSignificancePercent = 0.1;

struct RelativeMetric {
    double percent = 0.0;  // (experimental / baseline - 1) * 100
    bool significant = false;
};

RelativeMetric relative_metric(double experimental, double baseline);

/// Per-sample training cost under the accounting model:
///   FC layer:     6 * inputs * active_outputs (forward 2x, backward 4x)
///   embeddings:   embedding_dim per categorical feature
///   interaction:  pairs * 2 * embedding_dim
/// Embedding and interaction costs do not depend on masks.
struct FlopsBreakdown {
    std::uint64_t prunable_fc = 0;
    std::uint64_t fixed_fc = 0;
    std::uint64_t embedding = 0;
    std::uint64_t interaction = 0;

    [[nodiscard]] std::uint64_t fc() const noexcept { return prunable_fc + fixed_fc; }
    [[nodiscard]] std::uint64_t total() const noexcept { return fc() + embedding + interaction; }
};

std::uint64_t fc_layer_training_flops(std::size_t inputs, std::size_t active_outputs) noexcept;

/// Breakdown for a model whose FC layers have the given active counts.
FlopsBreakdown per_sample_flops(const ModelConfig& config, std::span<const std::size_t> active_outputs,
                                std::span<const std::size_t> prunable_layers);

template <typename T>
FlopsBreakdown per_sample_flops(const BasicModelState<T>& state, std::span<const std::size_t> prunable_layers);

/// FLOPs increment for one training batch under the model's current masks.
template <typename T>
std::uint64_t account_flops(std::size_t batch_size, const BasicModelState<T>& state);

struct WindowRecord {
    std::size_t index = 0;
    std::uint64_t start_sample = 0;
    std::uint64_t end_sample = 0;
    double ce = 0.0;
    double accuracy = 0.0;
    std::uint64_t cumulative_flops = 0;
    bool truncated = false;
};

class MetricsLedger {
public:
    void add_flops(std::uint64_t flops) noexcept { cumulative_flops_ += flops; }
    /// Windows must arrive in order and tile the stream without gaps.
    void record_window(const WindowRecord& record);

    [[nodiscard]] std::uint64_t cumulative_flops() const noexcept { return cumulative_flops_; }
    [[nodiscard]] const std::vector<WindowRecord>& windows() const noexcept { return windows_; }

    void write_csv(std::ostream& out) const;
    static std::vector<WindowRecord> read_csv(std::istream& in);

private:
    std::vector<WindowRecord> windows_;
    std::uint64_t cumulative_flops_ = 0;
};

}  // namespace growprune
