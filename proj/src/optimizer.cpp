// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/optimizer.hpp"

#include <limits>

#include "growprune/errors.hpp"

namespace growprune {

void OptimizerConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("optimizer: learning_rate must be a finite non-negative number");
    }
    if (!(adagrad_epsilon > 0.0)) throw ConfigError("optimizer: adagrad_epsilon must be positive");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adagrad"; }

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
    j = nlohmann::json{{"kind", to_string(c.kind)},
                       {"learning_rate", c.learning_rate},
                       {"adagrad_epsilon", c.adagrad_epsilon},
                       {"regrow_state", c.regrow == RegrowPolicy::Reset ? "reset" : "retain"},
                       {"flush_to_zero", c.flush_to_zero}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
    const std::string kind = j.value("kind", std::string("sgd"));
    if (kind == "sgd") {
        c.kind = OptimizerKind::Sgd;
    } else if (kind == "adagrad") {
        c.kind = OptimizerKind::Adagrad;
    } else {
        throw ConfigError("optimizer: unknown kind '" + kind + "'");
    }
    c.learning_rate = j.value("learning_rate", 0.1);
    c.adagrad_epsilon = j.value("adagrad_epsilon", 1e-10);
    const std::string regrow = j.value("regrow_state", std::string("reset"));
    if (regrow == "reset") {
        c.regrow = RegrowPolicy::Reset;
    } else if (regrow == "retain") {
        c.regrow = RegrowPolicy::Retain;
    } else {
        throw ConfigError("optimizer: regrow_state must be 'reset' or 'retain'");
    }
    c.flush_to_zero = j.value("flush_to_zero", true);
}

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& config, const BasicModelState<T>& shape) : config_(config) {
    config_.validate();
    if (config_.kind == OptimizerKind::Adagrad) {
        for (const auto& l : shape.layers) {
            acc_weight_.emplace_back(l.outputs(), l.inputs());
            acc_bias_.emplace_back(l.outputs(), T(0));
        }
        for (const auto& t : shape.embeddings) acc_embedding_.emplace_back(t.rows(), t.cols());
    }
}

namespace {

template <bool Relaxed, typename T>
inline T load(T& x) noexcept {
    if constexpr (Relaxed) {
        return std::atomic_ref<T>(x).load(std::memory_order_relaxed);
    } else {
        return x;
    }
}

template <bool Relaxed, typename T>
inline void store(T& x, T v) noexcept {
    if constexpr (Relaxed) {
        std::atomic_ref<T>(x).store(v, std::memory_order_relaxed);
    } else {
        x = v;
    }
}

template <typename T>
inline T flushed(T v, bool enabled) noexcept {
    if (enabled) {
        const T a = std::fabs(v);
        if (a > T(0) && a < std::numeric_limits<float>::min()) return std::copysign(T(0), v);
    }
    return v;
}

// One parameter update; `acc` is null for SGD.
template <bool Relaxed, typename T>
inline void step_one(T& w, T* acc, T g, T lr, T eps, bool ftz) noexcept {
    if (acc == nullptr) {
        store<Relaxed>(w, flushed(load<Relaxed>(w) - lr * g, ftz));
        return;
    }
    const T a = flushed(load<Relaxed>(*acc) + g * g, ftz);
    store<Relaxed>(*acc, a);
    store<Relaxed>(w, flushed(load<Relaxed>(w) - lr * g / (std::sqrt(a) + eps), ftz));
}

}  // namespace

template <typename T>
template <bool Relaxed>
void Optimizer<T>::apply_impl(BasicModelState<T>& state, const Gradients<T>& grads,
                              const std::vector<RowMask>* masks) {
    if (grads.weight.size() != state.layers.size() || grads.bias.size() != state.layers.size() ||
        grads.embedding.size() != state.embeddings.size()) {
        throw ShapeError("optimizer: gradient set does not match model");
    }
    if (masks != nullptr && masks->size() != state.layers.size()) {
        throw ShapeError("optimizer: mask set does not match model");
    }
    const bool adagrad = config_.kind == OptimizerKind::Adagrad;
    const T lr = static_cast<T>(config_.learning_rate);
    const T eps = static_cast<T>(config_.adagrad_epsilon);
    const bool ftz = config_.flush_to_zero;

    for (std::size_t l = 0; l < state.layers.size(); ++l) {
        DenseLayer<T>& layer = state.layers[l];
        const Matrix<T>& gw = grads.weight[l];
        const std::vector<T>& gb = grads.bias[l];
        if (gw.rows() != layer.outputs() || gw.cols() != layer.inputs() || gb.size() != layer.outputs()) {
            throw ShapeError("optimizer: gradient shape mismatch for " + layer.name);
        }
        const RowMask& mask = masks != nullptr ? (*masks)[l] : layer.mask;
        if (mask.size() != layer.outputs()) throw ShapeError("optimizer: mask width mismatch for " + layer.name);
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            if (!mask.keep(o)) continue;
            T* w = layer.weight.row(o).data();
            const T* g = gw.row(o).data();
            T* acc = adagrad ? acc_weight_[l].row(o).data() : nullptr;
            for (std::size_t i = 0; i < layer.inputs(); ++i) {
                step_one<Relaxed>(w[i], acc ? acc + i : nullptr, g[i], lr, eps, ftz);
            }
            step_one<Relaxed>(layer.bias[o], adagrad ? &acc_bias_[l][o] : nullptr, gb[o], lr, eps, ftz);
        }
    }

    for (std::size_t f = 0; f < state.embeddings.size(); ++f) {
        Matrix<T>& table = state.embeddings[f];
        const EmbeddingGrad<T>& eg = grads.embedding[f];
        if (eg.values.rows() != eg.rows.size() || (eg.values.rows() > 0 && eg.values.cols() != table.cols())) {
            throw ShapeError("optimizer: embedding gradient shape mismatch for feature " + std::to_string(f));
        }
        for (std::size_t r = 0; r < eg.rows.size(); ++r) {
            const std::uint32_t row = eg.rows[r];
            if (row >= table.rows()) throw ShapeError("optimizer: embedding row out of range");
            T* w = table.row(row).data();
            const T* g = eg.values.row(r).data();
            T* acc = adagrad ? acc_embedding_[f].row(row).data() : nullptr;
            for (std::size_t k = 0; k < table.cols(); ++k) {
                step_one<Relaxed>(w[k], acc ? acc + k : nullptr, g[k], lr, eps, ftz);
            }
        }
    }
}

template <typename T>
void Optimizer<T>::on_growth(const std::vector<RowMask>& before) {
    if (config_.kind != OptimizerKind::Adagrad || config_.regrow != RegrowPolicy::Reset) return;
    if (before.size() != acc_weight_.size()) throw ShapeError("optimizer: mask set does not match model");
    for (std::size_t l = 0; l < before.size(); ++l) {
        for (std::size_t o = 0; o < before[l].size(); ++o) {
            if (before[l].keep(o)) continue;
            auto row = acc_weight_[l].row(o);
            std::fill(row.begin(), row.end(), T(0));
            acc_bias_[l][o] = T(0);
        }
    }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace growprune
