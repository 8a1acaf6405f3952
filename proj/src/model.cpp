// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "growprune/errors.hpp"
#include "growprune/random.hpp"

namespace growprune {

void ModelConfig::validate() const {
    if (num_categorical == 0) throw ConfigError("model: at least one categorical feature is required");
    if (num_continuous == 0) throw ConfigError("model: at least one continuous feature is required");
    if (embedding_dim == 0) throw ConfigError("model: embedding_dim must be positive");
    if (table_sizes.size() != num_categorical) {
        throw ConfigError("model: table_sizes has " + std::to_string(table_sizes.size()) + " entries, expected " +
                          std::to_string(num_categorical));
    }
    for (std::size_t s : table_sizes) {
        if (s == 0) throw ConfigError("model: embedding tables need at least one row");
    }
    if (bottom_dims.empty() || top_dims.empty()) throw ConfigError("model: both MLP stacks need a layer");
    for (std::size_t d : bottom_dims) {
        if (d == 0) throw ConfigError("model: zero-width bottom layer");
    }
    for (std::size_t d : top_dims) {
        if (d == 0) throw ConfigError("model: zero-width top layer");
    }
    if (bottom_dims.back() != embedding_dim) {
        throw ConfigError("model: last bottom layer width must equal embedding_dim");
    }
    if (top_dims.back() != 1) throw ConfigError("model: last top layer width must be 1");
}

std::size_t ModelConfig::interaction_pairs() const noexcept {
    const std::size_t n = num_categorical + 1;
    return n * (n - 1) / 2;
}

std::vector<LayerShape> ModelConfig::fc_shapes() const {
    std::vector<LayerShape> out;
    std::size_t in = num_continuous;
    for (std::size_t k = 0; k < bottom_dims.size(); ++k) {
        out.push_back({"bottom." + std::to_string(k), in, bottom_dims[k]});
        in = bottom_dims[k];
    }
    in = top_input_width();
    for (std::size_t k = 0; k < top_dims.size(); ++k) {
        out.push_back({"top." + std::to_string(k), in, top_dims[k]});
        in = top_dims[k];
    }
    return out;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"num_continuous", c.num_continuous}, {"num_categorical", c.num_categorical},
                       {"embedding_dim", c.embedding_dim},   {"table_sizes", c.table_sizes},
                       {"bottom_dims", c.bottom_dims},       {"top_dims", c.top_dims}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.num_continuous = j.value("num_continuous", d.num_continuous);
    c.num_categorical = j.value("num_categorical", d.num_categorical);
    c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
    c.bottom_dims = j.value("bottom_dims", d.bottom_dims);
    c.top_dims = j.value("top_dims", d.top_dims);
    // A scalar table_size gives every feature the same table and wins over table_sizes.
    if (j.contains("table_size")) {
        c.table_sizes.assign(c.num_categorical, j.at("table_size").get<std::size_t>());
    } else if (j.contains("table_sizes")) {
        c.table_sizes = j.at("table_sizes").get<std::vector<std::size_t>>();
    } else {
        c.table_sizes.assign(c.num_categorical, d.table_sizes.front());
    }
}

template <typename T>
BasicModelState<T> BasicModelState<T>::zeros(const ModelConfig& config) {
    config.validate();
    BasicModelState s;
    s.config = config;
    for (std::size_t rows : config.table_sizes) s.embeddings.emplace_back(rows, config.embedding_dim);
    for (const LayerShape& shape : config.fc_shapes()) {
        DenseLayer<T> layer;
        layer.name = shape.name;
        layer.weight = Matrix<T>(shape.outputs, shape.inputs);
        layer.bias.assign(shape.outputs, T(0));
        layer.mask = RowMask::dense(shape.outputs);
        s.layers.push_back(std::move(layer));
    }
    return s;
}

template <typename T>
BasicModelState<T> BasicModelState<T>::init(const ModelConfig& config, std::uint64_t seed) {
    BasicModelState s = zeros(config);
    Rng rng(derive_seed(seed, 0x6d6f64656c));
    for (Matrix<T>& table : s.embeddings) {
        const double bound = std::sqrt(1.0 / static_cast<double>(table.rows()));
        for (T& v : table.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    for (DenseLayer<T>& layer : s.layers) {
        const double bound = std::sqrt(1.0 / static_cast<double>(layer.inputs()));
        for (T& v : layer.weight.values()) v = static_cast<T>(rng.uniform(-bound, bound));
        for (T& v : layer.bias) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    return s;
}

template <typename T>
bool BasicModelState<T>::dense() const noexcept {
    return std::all_of(layers.begin(), layers.end(), [](const DenseLayer<T>& l) { return l.mask.all_keep(); });
}

template <typename T>
std::size_t BasicModelState<T>::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].name == name) return i;
    }
    throw ConfigError("unknown layer '" + name + "'");
}

template <typename T>
template <typename U>
BasicModelState<U> BasicModelState<T>::cast() const {
    BasicModelState<U> out;
    out.config = config;
    out.step = step;
    for (const Matrix<T>& t : embeddings) out.embeddings.push_back(t.template cast<U>());
    for (const DenseLayer<T>& l : layers) {
        DenseLayer<U> c;
        c.name = l.name;
        c.weight = l.weight.template cast<U>();
        c.bias.assign(l.bias.begin(), l.bias.end());
        c.mask = l.mask;
        out.layers.push_back(std::move(c));
    }
    return out;
}

namespace {

template <typename T>
void relu_inplace(const Matrix<T>& pre, Matrix<T>& out) {
    if (out.rows() != pre.rows() || out.cols() != pre.cols()) out.reset(pre.rows(), pre.cols());
    const T* p = pre.data();
    T* o = out.data();
    for (std::size_t i = 0; i < pre.size(); ++i) o[i] = p[i] > T(0) ? p[i] : T(0);
}

// The subgradient at zero is taken as 1 so that rows regrown at exactly zero
// receive gradient on their first step.
template <typename T>
void relu_backward_inplace(const Matrix<T>& pre, Matrix<T>& grad) {
    const T* p = pre.data();
    T* g = grad.data();
    for (std::size_t i = 0; i < pre.size(); ++i) g[i] = p[i] >= T(0) ? g[i] : T(0);
}

// Vectors taking part in the interaction: index 0 is the bottom MLP output,
// 1..F the embeddings. Pairs are enumerated as (i, j) with j < i.
template <typename T>
const Matrix<T>& interaction_vector(const BatchActivations<T>& cache, std::size_t i) {
    return i == 0 ? cache.bottom_out : cache.embedded[i - 1];
}

}  // namespace

template <typename T>
std::span<const T> forward(const BasicModelState<T>& state, const MiniBatch& batch, BatchActivations<T>& cache) {
    const ModelConfig& cfg = state.config;
    if (batch.num_continuous != cfg.num_continuous || batch.num_categorical != cfg.num_categorical) {
        throw ShapeError("forward: batch has " + std::to_string(batch.num_continuous) + " continuous / " +
                         std::to_string(batch.num_categorical) + " categorical features, model expects " +
                         std::to_string(cfg.num_continuous) + " / " + std::to_string(cfg.num_categorical));
    }
    const std::size_t n = batch.size();
    const std::size_t dim = cfg.embedding_dim;
    const std::size_t nlayers = state.layers.size();
    const std::size_t nbottom = state.bottom_count();

    cache.step = state.step;
    cache.batch = n;
    cache.inputs.resize(nlayers);
    cache.pre.resize(nlayers);
    cache.embedded.resize(cfg.num_categorical);
    cache.indices = batch.categorical;

    // Continuous features, feature-major.
    Matrix<T>& x0 = cache.inputs[0];
    x0.reset(cfg.num_continuous, n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto row = batch.continuous_row(s);
        for (std::size_t f = 0; f < cfg.num_continuous; ++f) x0(f, s) = static_cast<T>(row[f]);
    }

    // Embedding lookups.
    for (std::size_t f = 0; f < cfg.num_categorical; ++f) {
        Matrix<T>& e = cache.embedded[f];
        e.reset(dim, n);
        const Matrix<T>& table = state.embeddings[f];
        for (std::size_t s = 0; s < n; ++s) {
            const std::uint32_t idx = batch.categorical[s * cfg.num_categorical + f];
            if (idx >= table.rows()) {
                throw DataError("forward: categorical index " + std::to_string(idx) + " out of range for feature " +
                                std::to_string(f) + " (table size " + std::to_string(table.rows()) + ")");
            }
            const T* r = table.row(idx).data();
            for (std::size_t k = 0; k < dim; ++k) e(k, s) = r[k];
        }
    }

    // Bottom MLP, ReLU after every layer.
    for (std::size_t l = 0; l < nbottom; ++l) {
        const DenseLayer<T>& layer = state.layers[l];
        masked_affine_forward_batch(cache.inputs[l], layer.weight, std::span<const T>(layer.bias), layer.mask,
                                    cache.pre[l], layer.name);
        Matrix<T>& next = (l + 1 < nbottom) ? cache.inputs[l + 1] : cache.bottom_out;
        relu_inplace(cache.pre[l], next);
    }

    // Interaction: [bottom_out ; pairwise dots].
    Matrix<T>& top_in = cache.inputs[nbottom];
    top_in.reset(cfg.top_input_width(), n);
    for (std::size_t k = 0; k < dim; ++k) {
        std::copy_n(cache.bottom_out.row(k).data(), n, top_in.row(k).data());
    }
    std::size_t p = dim;
    const std::size_t nvec = cfg.num_categorical + 1;
    for (std::size_t i = 1; i < nvec; ++i) {
        const Matrix<T>& vi = interaction_vector(cache, i);
        for (std::size_t j = 0; j < i; ++j, ++p) {
            const Matrix<T>& vj = interaction_vector(cache, j);
            T* __restrict out = top_in.row(p).data();
            for (std::size_t k = 0; k < dim; ++k) {
                const T* a = vi.row(k).data();
                const T* b = vj.row(k).data();
                for (std::size_t s = 0; s < n; ++s) out[s] += a[s] * b[s];
            }
        }
    }

    // Top MLP, ReLU on hidden layers, sigmoid on the output.
    for (std::size_t l = nbottom; l < nlayers; ++l) {
        const DenseLayer<T>& layer = state.layers[l];
        masked_affine_forward_batch(cache.inputs[l], layer.weight, std::span<const T>(layer.bias), layer.mask,
                                    cache.pre[l], layer.name);
        if (l + 1 < nlayers) relu_inplace(cache.pre[l], cache.inputs[l + 1]);
    }
    cache.predictions.resize(n);
    const T* logits = cache.pre[nlayers - 1].data();
    for (std::size_t s = 0; s < n; ++s) cache.predictions[s] = T(1) / (T(1) + std::exp(-logits[s]));
    return cache.predictions;
}

template <typename T>
std::vector<T> predict(const BasicModelState<T>& state, const MiniBatch& batch) {
    BatchActivations<T> cache;
    const auto p = forward(state, batch, cache);
    return {p.begin(), p.end()};
}

template <typename T>
void backward(const BasicModelState<T>& state, const BatchActivations<T>& cache, std::span<const float> labels,
              Gradients<T>& grads) {
    const ModelConfig& cfg = state.config;
    if (cache.step != state.step) {
        throw Error("backward: activation cache from step " + std::to_string(cache.step) +
                    " used at step " + std::to_string(state.step));
    }
    const std::size_t n = cache.batch;
    if (labels.size() != n) throw ShapeError("backward: label count does not match batch");
    const std::size_t dim = cfg.embedding_dim;
    const std::size_t nlayers = state.layers.size();
    const std::size_t nbottom = state.bottom_count();

    grads.weight.resize(nlayers);
    grads.bias.resize(nlayers);
    grads.embedding.resize(cfg.num_categorical);

    // d(mean BCE)/d(logit) = (p - y) / n.
    Matrix<T> grad_out(1, n);
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t s = 0; s < n; ++s) {
        grad_out(0, s) = (cache.predictions[s] - static_cast<T>(labels[s])) * inv_n;
    }

    Matrix<T> grad_in;
    for (std::size_t l = nlayers; l-- > nbottom;) {
        const DenseLayer<T>& layer = state.layers[l];
        grads.bias[l].assign(layer.outputs(), T(0));
        masked_affine_backward_batch(cache.inputs[l], layer.weight, layer.mask, grad_out, &grad_in, grads.weight[l],
                                     std::span<T>(grads.bias[l]), layer.name);
        if (l > nbottom) {
            relu_backward_inplace(cache.pre[l - 1], grad_in);
            std::swap(grad_out, grad_in);
        }
    }

    // grad_in now holds d/d(top input). Split into bottom output and pairs.
    const Matrix<T>& grad_top_in = grad_in;
    Matrix<T> grad_bottom(dim, n);
    for (std::size_t k = 0; k < dim; ++k) std::copy_n(grad_top_in.row(k).data(), n, grad_bottom.row(k).data());
    std::vector<Matrix<T>> grad_emb(cfg.num_categorical, Matrix<T>(dim, n));
    auto grad_vector = [&](std::size_t i) -> Matrix<T>& { return i == 0 ? grad_bottom : grad_emb[i - 1]; };
    std::size_t p = dim;
    const std::size_t nvec = cfg.num_categorical + 1;
    for (std::size_t i = 1; i < nvec; ++i) {
        const Matrix<T>& vi = interaction_vector(cache, i);
        Matrix<T>& gi = grad_vector(i);
        for (std::size_t j = 0; j < i; ++j, ++p) {
            const Matrix<T>& vj = interaction_vector(cache, j);
            Matrix<T>& gj = grad_vector(j);
            const T* __restrict g = grad_top_in.row(p).data();
            for (std::size_t k = 0; k < dim; ++k) {
                const T* a = vi.row(k).data();
                const T* b = vj.row(k).data();
                T* __restrict ga = gi.row(k).data();
                T* __restrict gb = gj.row(k).data();
                for (std::size_t s = 0; s < n; ++s) {
                    ga[s] += g[s] * b[s];
                    gb[s] += g[s] * a[s];
                }
            }
        }
    }

    // Bottom MLP.
    grad_out = std::move(grad_bottom);
    relu_backward_inplace(cache.pre[nbottom - 1], grad_out);
    for (std::size_t l = nbottom; l-- > 0;) {
        const DenseLayer<T>& layer = state.layers[l];
        grads.bias[l].assign(layer.outputs(), T(0));
        masked_affine_backward_batch(cache.inputs[l], layer.weight, layer.mask, grad_out, l > 0 ? &grad_in : nullptr,
                                     grads.weight[l], std::span<T>(grads.bias[l]), layer.name);
        if (l > 0) {
            relu_backward_inplace(cache.pre[l - 1], grad_in);
            std::swap(grad_out, grad_in);
        }
    }

    // Embedding rows, summed over duplicate lookups.
    std::unordered_map<std::uint32_t, std::size_t> slot;
    for (std::size_t f = 0; f < cfg.num_categorical; ++f) {
        EmbeddingGrad<T>& eg = grads.embedding[f];
        eg.rows.clear();
        slot.clear();
        std::vector<std::size_t> sample_slot(n);
        for (std::size_t s = 0; s < n; ++s) {
            const std::uint32_t idx = cache.indices[s * cfg.num_categorical + f];
            auto [it, inserted] = slot.try_emplace(idx, eg.rows.size());
            if (inserted) eg.rows.push_back(idx);
            sample_slot[s] = it->second;
        }
        eg.values.reset(eg.rows.size(), dim);
        const Matrix<T>& g = grad_emb[f];
        for (std::size_t s = 0; s < n; ++s) {
            T* dst = eg.values.row(sample_slot[s]).data();
            for (std::size_t k = 0; k < dim; ++k) dst[k] += g(k, s);
        }
    }
}

template <typename T>
Gradients<T> backward(const BasicModelState<T>& state, const BatchActivations<T>& cache,
                      std::span<const float> labels) {
    Gradients<T> g;
    backward(state, cache, labels, g);
    return g;
}

double bce_term(double prediction, double label) noexcept {
    const double p = std::clamp(prediction, kPredictionEpsilon, 1.0 - kPredictionEpsilon);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

template <typename T>
double bce_loss(std::span<const T> predictions, std::span<const float> labels) {
    if (predictions.size() != labels.size()) throw ShapeError("bce_loss: prediction/label count mismatch");
    if (predictions.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        sum += bce_term(static_cast<double>(predictions[i]), labels[i]);
    }
    return sum / static_cast<double>(predictions.size());
}

#define GROWPRUNE_INSTANTIATE_MODEL(T)                                                                        \
    template struct BasicModelState<T>;                                                                        \
    template std::span<const T> forward(const BasicModelState<T>&, const MiniBatch&, BatchActivations<T>&);    \
    template std::vector<T> predict(const BasicModelState<T>&, const MiniBatch&);                              \
    template void backward(const BasicModelState<T>&, const BatchActivations<T>&, std::span<const float>,      \
                           Gradients<T>&);                                                                     \
    template Gradients<T> backward(const BasicModelState<T>&, const BatchActivations<T>&,                      \
                                   std::span<const float>);                                                    \
    template double bce_loss(std::span<const T>, std::span<const float>);

GROWPRUNE_INSTANTIATE_MODEL(float)
GROWPRUNE_INSTANTIATE_MODEL(double)

template BasicModelState<double> BasicModelState<float>::cast<double>() const;
template BasicModelState<float> BasicModelState<double>::cast<float>() const;
template BasicModelState<float> BasicModelState<float>::cast<float>() const;

}  // namespace growprune
