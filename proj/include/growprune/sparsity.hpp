// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structured pruning of FC output neurons ranked by a first-order Taylor
// estimate of the loss change, and zero-initialized regrowth.
//
// The importance of neuron t in a layer with weight row w_t and gradient
// row g_t is  sum_i |g_t[i] * w_t[i]|,  accumulated over a trailing window of
// dense-phase batches. Ranking is per layer; the top keep_count neurons
// survive and everything else in the layer is zeroed (row and bias together).

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "growprune/model.hpp"

namespace growprune {

/// Layers that may be pruned by default: every FC layer except the final
/// bottom layer (its width is the interaction dimension) and the final top
/// layer (the single output logit).
std::vector<std::size_t> default_prunable_layers(const ModelConfig& config);

/// Resolves layer names ("bottom.0", "top.1", ...) to indices; the final top
/// layer is rejected.
std::vector<std::size_t> resolve_prunable_layers(const ModelConfig& config, const std::vector<std::string>& names);

/// max(1, round((1 - beta) * outputs)).
std::size_t keep_count(double beta, std::size_t outputs);

struct ImportanceAccumulator {
    std::vector<std::size_t> layers;          // FC layer indices being scored
    std::vector<std::vector<double>> scores;  // one vector per entry of `layers`
    std::size_t window_batches = 0;

    template <typename T>
    static ImportanceAccumulator for_model(const BasicModelState<T>& state, const std::vector<std::size_t>& layers);

    void reset();
    /// Elementwise sum, for accumulators filled by parallel workers.
    void merge(const ImportanceAccumulator& other);
};

/// Adds one batch's Taylor scores. Throws if any scored layer is currently
/// masked (scores of pruned rows would be degenerate zeros).
template <typename T>
void accumulate_scores(ImportanceAccumulator& acc, const Gradients<T>& grads, const BasicModelState<T>& params);

struct PruneDirective {
    double beta = 0.0;  // pruned fraction per prunable layer, in (0, 1)
    std::vector<std::size_t> prunable_layers;
    std::vector<std::size_t> keep_counts;  // parallel to prunable_layers

    static PruneDirective make(double beta, const ModelConfig& config, const std::vector<std::size_t>& layers);
};

/// Keeps the `keep` highest scores; ties go to the lower index.
RowMask top_k_mask(std::span<const double> scores, std::size_t keep);

/// One mask per FC layer; layers outside the directive get all-keep masks.
std::vector<RowMask> build_masks(const ImportanceAccumulator& acc, const PruneDirective& directive,
                                 const ModelConfig& config);

/// Uniformly random masks with the directive's keep counts. Used when a plan
/// starts sparse and no gradient history exists.
std::vector<RowMask> random_masks(const PruneDirective& directive, const ModelConfig& config, std::uint64_t seed);

struct LayerEventInfo {
    std::string name;
    std::size_t kept = 0;
    std::size_t outputs = 0;
    std::array<double, 5> score_percentiles{};  // min, p25, median, p75, max
    bool has_scores = false;
};

struct SparsityEvent {
    std::string kind;  // "prune", "grow", "initial_mask", "grow_noop"
    std::uint64_t step = 0;
    std::uint64_t samples = 0;
    std::vector<LayerEventInfo> layers;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Installs `masks`, zeroing the weight rows and biases of pruned neurons.
template <typename T>
SparsityEvent apply_prune(BasicModelState<T>& state, const std::vector<RowMask>& masks,
                          const ImportanceAccumulator* scores = nullptr);

/// Makes every mask all-keep. Regrown rows are set to exactly zero and the
/// masks in effect before growth are returned (for optimizer bookkeeping).
/// Growing an already dense model changes nothing and reports "grow_noop".
template <typename T>
SparsityEvent apply_growth(BasicModelState<T>& state, std::vector<RowMask>* before = nullptr);

}  // namespace growprune
