// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "growprune/model.hpp"

namespace growprune {

enum class OptimizerKind { Sgd, Adagrad };

/// What happens to Adagrad accumulators of rows that are regrown.
enum class RegrowPolicy { Reset, Retain };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.1;
    double adagrad_epsilon = 1e-10;
    RegrowPolicy regrow = RegrowPolicy::Reset;
    /// Flush subnormal weights and accumulators to zero after every update.
    bool flush_to_zero = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
std::string to_string(OptimizerKind k);

/// SGD / Adagrad with a constant learning rate. Rows whose mask flag is off
/// are never touched, so pruned rows (and their accumulators) stay bitwise
/// frozen for the whole sparse phase.
template <typename T>
class Optimizer {
public:
    Optimizer(const OptimizerConfig& config, const BasicModelState<T>& shape);

    [[nodiscard]] const OptimizerConfig& config() const noexcept { return config_; }

    void apply(BasicModelState<T>& state, const Gradients<T>& grads) { apply_impl<false>(state, grads, nullptr); }

    /// Same update with every parameter/accumulator access done through
    /// relaxed std::atomic_ref, for lock-free updates to a shared model.
    /// `masks`, when given, replaces the state's masks for row selection (a
    /// worker applies updates under the masks of its own snapshot).
    void apply_relaxed(BasicModelState<T>& state, const Gradients<T>& grads,
                       const std::vector<RowMask>* masks = nullptr) {
        apply_impl<true>(state, grads, masks);
    }

    /// Called right after growth with the masks that were active before it:
    /// resets accumulators of regrown rows under RegrowPolicy::Reset.
    void on_growth(const std::vector<RowMask>& before);

    [[nodiscard]] const std::vector<Matrix<T>>& weight_accumulators() const noexcept { return acc_weight_; }
    [[nodiscard]] const std::vector<std::vector<T>>& bias_accumulators() const noexcept { return acc_bias_; }
    [[nodiscard]] const std::vector<Matrix<T>>& embedding_accumulators() const noexcept { return acc_embedding_; }

private:
    template <bool Relaxed>
    void apply_impl(BasicModelState<T>& state, const Gradients<T>& grads, const std::vector<RowMask>* masks);

    OptimizerConfig config_;
    std::vector<Matrix<T>> acc_weight_;
    std::vector<std::vector<T>> acc_bias_;
    std::vector<Matrix<T>> acc_embedding_;
};

}  // namespace growprune
