// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "growprune/errors.hpp"
#include "growprune/random.hpp"

namespace growprune {

std::vector<std::size_t> default_prunable_layers(const ModelConfig& config) {
    std::vector<std::size_t> out;
    const std::size_t nbottom = config.bottom_dims.size();
    for (std::size_t l = 0; l + 1 < nbottom; ++l) out.push_back(l);
    for (std::size_t l = 0; l + 1 < config.top_dims.size(); ++l) out.push_back(nbottom + l);
    return out;
}

std::vector<std::size_t> resolve_prunable_layers(const ModelConfig& config, const std::vector<std::string>& names) {
    const auto shapes = config.fc_shapes();
    std::vector<std::size_t> out;
    for (const std::string& name : names) {
        auto it = std::find_if(shapes.begin(), shapes.end(), [&](const LayerShape& s) { return s.name == name; });
        if (it == shapes.end()) throw ConfigError("prunable layer '" + name + "' does not exist");
        const auto idx = static_cast<std::size_t>(it - shapes.begin());
        if (idx + 1 == shapes.size()) throw ConfigError("the output layer cannot be pruned");
        out.push_back(idx);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t keep_count(double beta, std::size_t outputs) {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("sparsity beta must lie in (0, 1)");
    const auto k = static_cast<std::size_t>(std::llround((1.0 - beta) * static_cast<double>(outputs)));
    return std::max<std::size_t>(1, k);
}

template <typename T>
ImportanceAccumulator ImportanceAccumulator::for_model(const BasicModelState<T>& state,
                                                       const std::vector<std::size_t>& layers) {
    ImportanceAccumulator acc;
    acc.layers = layers;
    for (std::size_t l : layers) {
        if (l >= state.layers.size()) throw ShapeError("importance accumulator: layer index out of range");
        acc.scores.emplace_back(state.layers[l].outputs(), 0.0);
    }
    return acc;
}

void ImportanceAccumulator::reset() {
    for (auto& s : scores) std::fill(s.begin(), s.end(), 0.0);
    window_batches = 0;
}

void ImportanceAccumulator::merge(const ImportanceAccumulator& other) {
    if (other.layers != layers) throw ShapeError("importance accumulator: merging different layer sets");
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (other.scores[k].size() != scores[k].size()) throw ShapeError("importance accumulator: size mismatch");
        for (std::size_t t = 0; t < scores[k].size(); ++t) scores[k][t] += other.scores[k][t];
    }
    window_batches += other.window_batches;
}

template <typename T>
void accumulate_scores(ImportanceAccumulator& acc, const Gradients<T>& grads, const BasicModelState<T>& params) {
    for (std::size_t k = 0; k < acc.layers.size(); ++k) {
        const std::size_t l = acc.layers[k];
        const DenseLayer<T>& layer = params.layers[l];
        if (!layer.mask.all_keep()) {
            throw Error("accumulate_scores: layer " + layer.name + " is masked; scores need a dense-phase gradient");
        }
        const Matrix<T>& g = grads.weight.at(l);
        if (g.rows() != layer.outputs() || g.cols() != layer.inputs() || acc.scores[k].size() != layer.outputs()) {
            throw ShapeError("accumulate_scores: shape mismatch for " + layer.name);
        }
        for (std::size_t t = 0; t < layer.outputs(); ++t) {
            const T* w = layer.weight.row(t).data();
            const T* gr = g.row(t).data();
            double s = 0.0;
            for (std::size_t i = 0; i < layer.inputs(); ++i) {
                s += std::fabs(static_cast<double>(gr[i]) * static_cast<double>(w[i]));
            }
            acc.scores[k][t] += s;
        }
    }
    ++acc.window_batches;
}

PruneDirective PruneDirective::make(double beta, const ModelConfig& config, const std::vector<std::size_t>& layers) {
    PruneDirective d;
    d.beta = beta;
    d.prunable_layers = layers;
    const auto shapes = config.fc_shapes();
    for (std::size_t l : layers) {
        if (l >= shapes.size()) throw ConfigError("prune directive: layer index out of range");
        d.keep_counts.push_back(keep_count(beta, shapes[l].outputs));
    }
    return d;
}

RowMask top_k_mask(std::span<const double> scores, std::size_t keep) {
    if (keep < 1) throw ConfigError("build_masks: keep count must be at least 1");
    if (keep > scores.size()) throw ConfigError("build_masks: keep count exceeds layer width");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    RowMask mask(scores.size(), false);
    for (std::size_t k = 0; k < keep; ++k) mask.set(order[k], true);
    return mask;
}

std::vector<RowMask> build_masks(const ImportanceAccumulator& acc, const PruneDirective& directive,
                                 const ModelConfig& config) {
    if (acc.window_batches == 0) throw Error("build_masks: importance accumulator is empty");
    const auto shapes = config.fc_shapes();
    std::vector<RowMask> masks;
    for (const auto& s : shapes) masks.push_back(RowMask::dense(s.outputs));
    for (std::size_t k = 0; k < directive.prunable_layers.size(); ++k) {
        const std::size_t l = directive.prunable_layers[k];
        const auto it = std::find(acc.layers.begin(), acc.layers.end(), l);
        if (it == acc.layers.end()) throw Error("build_masks: no scores for layer " + shapes[l].name);
        const auto& scores = acc.scores[static_cast<std::size_t>(it - acc.layers.begin())];
        masks[l] = top_k_mask(scores, directive.keep_counts[k]);
    }
    return masks;
}

std::vector<RowMask> random_masks(const PruneDirective& directive, const ModelConfig& config, std::uint64_t seed) {
    const auto shapes = config.fc_shapes();
    std::vector<RowMask> masks;
    for (const auto& s : shapes) masks.push_back(RowMask::dense(s.outputs));
    Rng rng(derive_seed(seed, 0x72616e646d61736b));
    for (std::size_t k = 0; k < directive.prunable_layers.size(); ++k) {
        const std::size_t l = directive.prunable_layers[k];
        std::vector<std::size_t> order(shapes[l].outputs);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        RowMask m(shapes[l].outputs, false);
        for (std::size_t i = 0; i < directive.keep_counts[k]; ++i) m.set(order[i], true);
        masks[l] = std::move(m);
    }
    return masks;
}

namespace {

std::array<double, 5> percentiles(std::vector<double> v) {
    std::array<double, 5> out{};
    if (v.empty()) return out;
    std::sort(v.begin(), v.end());
    const double qs[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) {
        const double pos = qs[i] * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = static_cast<std::size_t>(std::ceil(pos));
        out[static_cast<std::size_t>(i)] = v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
    }
    return out;
}

template <typename T>
std::vector<LayerEventInfo> describe_layers(const BasicModelState<T>& state, const ImportanceAccumulator* scores) {
    std::vector<LayerEventInfo> out;
    for (std::size_t l = 0; l < state.layers.size(); ++l) {
        LayerEventInfo info;
        info.name = state.layers[l].name;
        info.kept = state.layers[l].mask.active_count();
        info.outputs = state.layers[l].outputs();
        if (scores != nullptr) {
            const auto it = std::find(scores->layers.begin(), scores->layers.end(), l);
            if (it != scores->layers.end()) {
                info.score_percentiles = percentiles(scores->scores[static_cast<std::size_t>(it - scores->layers.begin())]);
                info.has_scores = true;
            }
        }
        out.push_back(std::move(info));
    }
    return out;
}

}  // namespace

nlohmann::json SparsityEvent::to_json() const {
    nlohmann::json kept = nlohmann::json::object();
    nlohmann::json pct = nlohmann::json::object();
    for (const auto& l : layers) {
        kept[l.name] = l.kept;
        if (l.has_scores) pct[l.name] = l.score_percentiles;
    }
    nlohmann::json j{{"event", kind}, {"step", step}, {"samples", samples}, {"kept", kept}};
    if (!pct.empty()) j["score_percentiles"] = pct;
    return j;
}

template <typename T>
SparsityEvent apply_prune(BasicModelState<T>& state, const std::vector<RowMask>& masks,
                          const ImportanceAccumulator* scores) {
    if (masks.size() != state.layers.size()) throw ShapeError("apply_prune: one mask per FC layer required");
    for (std::size_t l = 0; l < masks.size(); ++l) {
        if (masks[l].size() != state.layers[l].outputs()) {
            throw ShapeError("apply_prune: mask width mismatch for " + state.layers[l].name);
        }
        if (masks[l].active_count() == 0) throw ShapeError("apply_prune: mask removes every neuron of " +
                                                            state.layers[l].name);
    }
    if (!masks.back().all_keep()) throw ShapeError("apply_prune: the output layer cannot be pruned");
    for (std::size_t l = 0; l < masks.size(); ++l) {
        DenseLayer<T>& layer = state.layers[l];
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            if (masks[l].keep(o)) continue;
            auto row = layer.weight.row(o);
            std::fill(row.begin(), row.end(), T(0));
            layer.bias[o] = T(0);
        }
        layer.mask = masks[l];
    }
    SparsityEvent ev;
    ev.kind = "prune";
    ev.step = state.step;
    ev.layers = describe_layers(state, scores);
    return ev;
}

template <typename T>
SparsityEvent apply_growth(BasicModelState<T>& state, std::vector<RowMask>* before) {
    SparsityEvent ev;
    ev.step = state.step;
    if (before != nullptr) {
        before->clear();
        for (const auto& l : state.layers) before->push_back(l.mask);
    }
    if (state.dense()) {
        ev.kind = "grow_noop";
        ev.layers = describe_layers(state, nullptr);
        return ev;
    }
    for (DenseLayer<T>& layer : state.layers) {
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            if (layer.mask.keep(o)) continue;
            auto row = layer.weight.row(o);
            std::fill(row.begin(), row.end(), T(0));
            layer.bias[o] = T(0);
        }
        layer.mask = RowMask::dense(layer.outputs());
    }
    ev.kind = "grow";
    ev.layers = describe_layers(state, nullptr);
    return ev;
}

#define GROWPRUNE_INSTANTIATE_SPARSITY(T)                                                                     \
    template ImportanceAccumulator ImportanceAccumulator::for_model(const BasicModelState<T>&,                 \
                                                                    const std::vector<std::size_t>&);          \
    template void accumulate_scores(ImportanceAccumulator&, const Gradients<T>&, const BasicModelState<T>&);    \
    template SparsityEvent apply_prune(BasicModelState<T>&, const std::vector<RowMask>&,                       \
                                       const ImportanceAccumulator*);                                           \
    template SparsityEvent apply_growth(BasicModelState<T>&, std::vector<RowMask>*);

GROWPRUNE_INSTANTIATE_SPARSITY(float)
GROWPRUNE_INSTANTIATE_SPARSITY(double)

}  // namespace growprune
