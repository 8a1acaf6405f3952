// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// DLRM-style click-through model: per-feature embedding tables, a bottom MLP
// over continuous features, pairwise dot-product interaction, a top MLP and a
// sigmoid output. Forward and backward are written by hand over the batched
// masked kernels in numeric.hpp.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "growprune/batch.hpp"
#include "growprune/numeric.hpp"

namespace growprune {

struct LayerShape {
    std::string name;
    std::size_t inputs = 0;
    std::size_t outputs = 0;
};

struct ModelConfig {
    std::size_t num_continuous = 13;
    std::size_t num_categorical = 26;
    std::size_t embedding_dim = 4;
    std::vector<std::size_t> table_sizes = std::vector<std::size_t>(26, 100000);
    std::vector<std::size_t> bottom_dims{256, 128, 64, 4};
    std::vector<std::size_t> top_dims{256, 128, 1};

    /// Throws ConfigError when the dimensions cannot form a model.
    void validate() const;

    /// Number of distinct pairs among the embedding vectors and the bottom
    /// MLP output: n(n-1)/2 with n = num_categorical + 1.
    [[nodiscard]] std::size_t interaction_pairs() const noexcept;
    [[nodiscard]] std::size_t top_input_width() const noexcept { return interaction_pairs() + embedding_dim; }
    [[nodiscard]] std::size_t fc_layer_count() const noexcept { return bottom_dims.size() + top_dims.size(); }
    [[nodiscard]] std::vector<LayerShape> fc_shapes() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename T>
struct DenseLayer {
    std::string name;
    Matrix<T> weight;  // outputs x inputs
    std::vector<T> bias;
    RowMask mask;

    [[nodiscard]] std::size_t inputs() const noexcept { return weight.cols(); }
    [[nodiscard]] std::size_t outputs() const noexcept { return weight.rows(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

template <typename T>
struct BasicModelState {
    ModelConfig config;
    std::vector<Matrix<T>> embeddings;
    std::vector<DenseLayer<T>> layers;  // bottom stack first, then top stack
    std::uint64_t step = 0;

    /// Seeded uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization. Tables
    /// use their row count as fan-in.
    static BasicModelState init(const ModelConfig& config, std::uint64_t seed);
    /// A model with every parameter zero and dense masks.
    static BasicModelState zeros(const ModelConfig& config);

    [[nodiscard]] std::size_t bottom_count() const noexcept { return config.bottom_dims.size(); }
    [[nodiscard]] std::size_t final_layer() const noexcept { return layers.size() - 1; }
    [[nodiscard]] bool dense() const noexcept;
    [[nodiscard]] std::size_t layer_index(const std::string& name) const;

    template <typename U>
    [[nodiscard]] BasicModelState<U> cast() const;

    friend bool operator==(const BasicModelState&, const BasicModelState&) = default;
};

using ModelState = BasicModelState<float>;

/// Everything the backward pass needs from a forward pass.
template <typename T>
struct BatchActivations {
    std::uint64_t step = 0;
    std::size_t batch = 0;
    std::vector<Matrix<T>> inputs;      // per FC layer, inputs x batch
    std::vector<Matrix<T>> pre;         // per FC layer, outputs x batch
    std::vector<Matrix<T>> embedded;    // per categorical feature, dim x batch
    Matrix<T> bottom_out;               // dim x batch
    std::vector<std::uint32_t> indices; // batch x num_categorical
    std::vector<T> predictions;
};

template <typename T>
struct EmbeddingGrad {
    std::vector<std::uint32_t> rows;  // unique, in order of first appearance
    Matrix<T> values;                 // rows.size() x dim
};

template <typename T>
struct Gradients {
    std::vector<Matrix<T>> weight;
    std::vector<std::vector<T>> bias;
    std::vector<EmbeddingGrad<T>> embedding;
};

/// Runs the model on a batch and fills `cache`. Returns the predictions, which
/// stay owned by the cache.
template <typename T>
std::span<const T> forward(const BasicModelState<T>& state, const MiniBatch& batch, BatchActivations<T>& cache);

/// Predictions only.
template <typename T>
std::vector<T> predict(const BasicModelState<T>& state, const MiniBatch& batch);

/// Gradients of mean BCE over the batch. Pruned rows receive exact zeros.
template <typename T>
void backward(const BasicModelState<T>& state, const BatchActivations<T>& cache, std::span<const float> labels,
              Gradients<T>& grads);

template <typename T>
Gradients<T> backward(const BasicModelState<T>& state, const BatchActivations<T>& cache,
                      std::span<const float> labels);

inline constexpr double kPredictionEpsilon = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
template <typename T>
double bce_loss(std::span<const T> predictions, std::span<const float> labels);

/// Per-sample clamped BCE.
double bce_term(double prediction, double label) noexcept;

}  // namespace growprune
