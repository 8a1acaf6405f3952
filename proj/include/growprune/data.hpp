// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Input streams: Criteo Kaggle TSV files and a seeded synthetic generator
// whose label process can drift between stream segments.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "growprune/batch.hpp"
#include "growprune/random.hpp"

namespace growprune {

/// 64-bit FNV-1a (offset basis 0xcbf29ce484222325, prime 0x100000001b3).
/// Categorical strings map to rows as hash % table_size.
constexpr std::uint64_t categorical_hash(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::size_t kCriteoContinuous = 13;
inline constexpr std::size_t kCriteoCategorical = 26;

/// Parses one Criteo row: label, 13 integers, 26 hex strings, tab separated,
/// any feature possibly empty. Integers become log(1 + max(x, 0)) (missing ->
/// 0); hex strings become categorical_hash % table_size (missing -> 0).
/// Returns false for malformed rows.
bool parse_criteo_line(std::string_view line, std::span<const std::size_t> table_sizes, float& label,
                       std::span<float> continuous, std::span<std::uint32_t> categorical);

class BatchSource {
public:
    virtual ~BatchSource() = default;
    /// Next batch of at most batch_size samples, or nullopt at end of stream.
    virtual std::optional<MiniBatch> next() = 0;
};

/// Number of newline-terminated lines (a final unterminated line counts).
std::uint64_t count_lines(const std::filesystem::path& path);

/// Streams rows [row_begin, row_end) of a Criteo TSV file in order.
class CriteoReader final : public BatchSource {
public:
    CriteoReader(const std::filesystem::path& path, std::vector<std::size_t> table_sizes, std::size_t batch_size,
                 std::uint64_t row_begin = 0, std::uint64_t row_end = UINT64_MAX);

    std::optional<MiniBatch> next() override;

    [[nodiscard]] std::uint64_t skipped() const noexcept { return skipped_; }
    [[nodiscard]] std::uint64_t delivered() const noexcept { return delivered_; }

private:
    std::ifstream in_;
    std::vector<std::size_t> table_sizes_;
    std::size_t batch_size_;
    std::uint64_t row_ = 0;
    std::uint64_t row_end_;
    std::uint64_t skipped_ = 0;
    std::uint64_t delivered_ = 0;
};

/// One stretch of a synthetic stream with its own category popularity and
/// label weights.
struct DriftSegment {
    double begin = 0.0;
    double end = 1.0;
    double zipf_exponent = 1.05;
    /// Distinct categories that can appear per feature (capped by table size).
    std::size_t active_categories = 1000;
    double scale = 2.0;  // std of the label logit's signal part
    double bias = -1.0;
    /// Gram-Schmidt the random weights against all earlier segments.
    bool orthogonal_to_previous = false;
    /// Explicit label weights over the feature map; random when empty.
    std::vector<double> weights;
};

/// Feature map phi(x, c) the label logits are linear in:
///   [x (continuous) ; relu(R x + r0) ; code_f(c_f) ; code_a * code_b pairs ;
///    code_f * x_j crosses]
/// where code_f(v) is a fixed pseudo-random unit-variance value per category.
struct FeatureMapSpec {
    std::size_t hidden_units = 16;
    std::size_t code_pairs = 16;
    std::size_t cross_terms = 8;
    /// Multipliers applied to random weights per block before normalization:
    /// linear, hidden, codes, pairs, crosses.
    std::vector<double> block_scales{1.0, 1.0, 1.0, 1.0, 1.0};
};

struct DriftSpec {
    std::uint64_t seed = 1;
    FeatureMapSpec feature_map;
    std::vector<DriftSegment> segments{DriftSegment{}};

    /// Segments must tile [0, 1] in order.
    void validate() const;
    [[nodiscard]] std::size_t segment_at(double progress) const;
};

void to_json(nlohmann::json& j, const DriftSpec& s);
void from_json(const nlohmann::json& j, DriftSpec& s);

struct StreamShape {
    std::size_t num_continuous = kCriteoContinuous;
    std::vector<std::size_t> table_sizes = std::vector<std::size_t>(kCriteoCategorical, 100000);
};

/// Precomputed generator parameters shared by the train and test streams.
class SyntheticProcess {
public:
    SyntheticProcess(DriftSpec spec, StreamShape shape);

    [[nodiscard]] const DriftSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const StreamShape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t feature_dim() const noexcept { return feature_dim_; }
    [[nodiscard]] std::span<const double> weights(std::size_t segment) const { return weights_[segment]; }

    /// Draws one sample from `segment`.
    void draw(std::size_t segment, Rng& rng, float& label, std::span<float> continuous,
              std::span<std::uint32_t> categorical) const;

    /// Noise-free click probability of a sample under `segment`.
    [[nodiscard]] double probability(std::size_t segment, std::span<const float> continuous,
                                     std::span<const std::uint32_t> categorical) const;

private:
    [[nodiscard]] double code(std::size_t feature, std::uint32_t value) const noexcept;
    void features(std::span<const float> x, std::span<const std::uint32_t> c, std::vector<double>& phi) const;

    DriftSpec spec_;
    StreamShape shape_;
    std::size_t feature_dim_ = 0;
    std::vector<double> hidden_w_;  // hidden_units x num_continuous
    std::vector<double> hidden_b_;
    std::vector<std::pair<std::size_t, std::size_t>> pairs_;
    std::vector<std::pair<std::size_t, std::size_t>> crosses_;  // (feature, continuous index)
    std::vector<std::vector<double>> weights_;                  // per segment
    struct Popularity {
        std::vector<double> cdf;                                       // over ranks
        std::vector<std::pair<std::uint64_t, std::uint64_t>> affine;  // per feature rank -> category
    };
    std::vector<Popularity> popularity_;  // per segment
};

/// Training stream of n_samples drawn sequentially; a sample at position i
/// comes from the segment covering i / n_samples. The held-out test stream
/// continues the process under the final segment with an independent RNG.
class SyntheticStream final : public BatchSource {
public:
    enum class Part { Train, Test };

    SyntheticStream(std::shared_ptr<const SyntheticProcess> process, std::uint64_t n_samples, std::size_t batch_size,
                    Part part = Part::Train, std::uint64_t progress_total = 0);

    std::optional<MiniBatch> next() override;

private:
    std::shared_ptr<const SyntheticProcess> process_;
    std::uint64_t n_samples_;
    std::uint64_t progress_total_;
    std::size_t batch_size_;
    Part part_;
    std::uint64_t produced_ = 0;
    Rng rng_;
};

}  // namespace growprune
