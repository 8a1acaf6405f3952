// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit and acceptance tests: a toy model config,
// random batches, and a central finite-difference gradient check that only
// uses forward().

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "growprune/model.hpp"

namespace growprune::testing {

/// 2 continuous, 3 categorical, embedding dim 2, bottom [4, 2], top [4, 1].
inline ModelConfig toy_config(std::size_t table_size = 5) {
    ModelConfig c;
    c.num_continuous = 2;
    c.num_categorical = 3;
    c.embedding_dim = 2;
    c.table_sizes.assign(3, table_size);
    c.bottom_dims = {4, 2};
    c.top_dims = {4, 1};
    return c;
}

/// Small DLRM-shaped config for fast training tests.
inline ModelConfig tiny_dlrm_config() {
    ModelConfig c;
    c.num_continuous = 4;
    c.num_categorical = 4;
    c.embedding_dim = 2;
    c.table_sizes.assign(4, 20);
    c.bottom_dims = {8, 2};
    c.top_dims = {8, 4, 1};
    return c;
}

inline MiniBatch random_batch(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::bernoulli_distribution coin(0.4);
    MiniBatch b;
    b.num_continuous = c.num_continuous;
    b.num_categorical = c.num_categorical;
    std::vector<float> x(c.num_continuous);
    std::vector<std::uint32_t> cat(c.num_categorical);
    for (std::size_t s = 0; s < n; ++s) {
        for (float& v : x) v = normal(rng);
        for (std::size_t f = 0; f < c.num_categorical; ++f) {
            cat[f] = static_cast<std::uint32_t>(rng() % c.table_sizes[f]);
        }
        b.push(coin(rng) ? 1.0f : 0.0f, x, cat);
    }
    return b;
}

/// Model with uniform(-scale, scale) parameters everywhere, embeddings
/// included, so every path carries signal.
template <typename T>
BasicModelState<T> random_model(const ModelConfig& c, std::uint64_t seed, double scale = 0.8) {
    BasicModelState<T> m = BasicModelState<T>::zeros(c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& t : m.embeddings) {
        for (T& v : t.values()) v = static_cast<T>(u(rng));
    }
    for (auto& l : m.layers) {
        for (T& v : l.weight.values()) v = static_cast<T>(u(rng));
        for (T& v : l.bias) v = static_cast<T>(u(rng));
    }
    return m;
}

/// Mean unclamped BCE of a double-precision model, computed from forward().
inline double reference_loss(const BasicModelState<double>& m, const MiniBatch& b) {
    const std::vector<double> p = predict(m, b);
    double sum = 0.0;
    for (std::size_t s = 0; s < p.size(); ++s) {
        sum -= b.labels[s] > 0.5f ? std::log(p[s]) : std::log(1.0 - p[s]);
    }
    return sum / static_cast<double>(p.size());
}

struct GradientCheck {
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst_relative = 0.0;
    std::string worst_parameter;
};

/// Compares analytic gradients with central differences for every parameter,
/// embedding rows included (rows absent from the batch must be exactly zero
/// analytically). A parameter passes when
///   |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|, abs_floor).
inline GradientCheck check_gradients(BasicModelState<double> m, const MiniBatch& b, double h = 1e-5,
                                     double rel_tol = 1e-4, double abs_floor = 1e-4) {
    BatchActivations<double> cache;
    forward(m, b, cache);
    const Gradients<double> g = backward(m, cache, std::span<const float>(b.labels));

    GradientCheck out;
    auto check = [&](double& param, double analytic, const std::string& name) {
        const double saved = param;
        param = saved + h;
        const double up = reference_loss(m, b);
        param = saved - h;
        const double down = reference_loss(m, b);
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), abs_floor});
        const double rel = std::fabs(analytic - numeric) / denom;
        ++out.checked;
        if (rel > rel_tol) ++out.failures;
        if (out.worst_parameter.empty() || rel > out.worst_relative) {
            out.worst_relative = rel;
            out.worst_parameter = name;
        }
    };

    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& layer = m.layers[l];
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            check(layer.weight.values()[i], g.weight[l].values()[i], layer.name + ".weight[" + std::to_string(i) + "]");
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            check(layer.bias[i], g.bias[l][i], layer.name + ".bias[" + std::to_string(i) + "]");
        }
    }
    for (std::size_t f = 0; f < m.embeddings.size(); ++f) {
        auto& table = m.embeddings[f];
        const auto& eg = g.embedding[f];
        for (std::size_t r = 0; r < table.rows(); ++r) {
            const auto it = std::find(eg.rows.begin(), eg.rows.end(), static_cast<std::uint32_t>(r));
            for (std::size_t k = 0; k < table.cols(); ++k) {
                const double analytic = it == eg.rows.end() ? 0.0 : eg.values(static_cast<std::size_t>(it - eg.rows.begin()), k);
                check(table(r, k), analytic, "embedding." + std::to_string(f) + "[" + std::to_string(r) + "," + std::to_string(k) + "]");
            }
        }
    }
    return out;
}

}  // namespace growprune::testing
