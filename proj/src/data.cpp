// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>

#include "growprune/errors.hpp"

namespace growprune {

namespace {

bool is_hex(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    });
}

}  // namespace

bool parse_criteo_line(std::string_view line, std::span<const std::size_t> table_sizes, float& label,
                       std::span<float> continuous, std::span<std::uint32_t> categorical) {
    if (continuous.size() != kCriteoContinuous || categorical.size() != kCriteoCategorical ||
        table_sizes.size() != kCriteoCategorical) {
        throw ShapeError("parse_criteo_line: expects 13 continuous and 26 categorical slots");
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t field = 0;
    std::size_t pos = 0;
    while (true) {
        const std::size_t tab = line.find('\t', pos);
        const std::string_view f = line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos);
        if (field == 0) {
            if (f == "0") {
                label = 0.0f;
            } else if (f == "1") {
                label = 1.0f;
            } else {
                return false;
            }
        } else if (field <= kCriteoContinuous) {
            double v = 0.0;
            if (!f.empty()) {
                long long x = 0;
                const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
                if (ec != std::errc{} || ptr != f.data() + f.size()) return false;
                v = std::log1p(static_cast<double>(std::max<long long>(x, 0)));
            }
            continuous[field - 1] = static_cast<float>(v);
        } else if (field <= kCriteoContinuous + kCriteoCategorical) {
            const std::size_t c = field - 1 - kCriteoContinuous;
            if (f.empty()) {
                categorical[c] = 0;
            } else {
                if (!is_hex(f)) return false;
                categorical[c] = static_cast<std::uint32_t>(categorical_hash(f) % table_sizes[c]);
            }
        } else {
            return false;  // too many fields
        }
        ++field;
        if (tab == std::string_view::npos) break;
        pos = tab + 1;
    }
    return field == 1 + kCriteoContinuous + kCriteoCategorical;
}

std::uint64_t count_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::uint64_t lines = 0;
    char last = '\n';
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0) break;
        lines += static_cast<std::uint64_t>(std::count(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(got), '\n'));
        last = buf[got - 1];
    }
    if (last != '\n') ++lines;
    return lines;
}

CriteoReader::CriteoReader(const std::filesystem::path& path, std::vector<std::size_t> table_sizes,
                           std::size_t batch_size, std::uint64_t row_begin, std::uint64_t row_end)
    : in_(path, std::ios::binary), table_sizes_(std::move(table_sizes)), batch_size_(batch_size), row_end_(row_end) {
    if (!in_) throw DataError("cannot open Criteo file " + path.string());
    if (table_sizes_.size() != kCriteoCategorical) throw ConfigError("Criteo input needs 26 table sizes");
    if (batch_size_ == 0) throw ConfigError("batch size must be positive");
    std::string line;
    while (row_ < row_begin && std::getline(in_, line)) ++row_;
}

std::optional<MiniBatch> CriteoReader::next() {
    MiniBatch batch;
    batch.num_continuous = kCriteoContinuous;
    batch.num_categorical = kCriteoCategorical;
    batch.reserve(batch_size_);
    std::string line;
    float label = 0.0f;
    std::array<float, kCriteoContinuous> cont{};
    std::array<std::uint32_t, kCriteoCategorical> cat{};
    while (batch.size() < batch_size_ && row_ < row_end_ && std::getline(in_, line)) {
        ++row_;
        if (!parse_criteo_line(line, table_sizes_, label, cont, cat)) {
            ++skipped_;
            continue;
        }
        batch.push(label, cont, cat);
    }
    if (batch.empty()) return std::nullopt;
    delivered_ += batch.size();
    return batch;
}

// --- synthetic drift -------------------------------------------------------

void DriftSpec::validate() const {
    if (segments.empty()) throw ConfigError("drift spec: at least one segment is required");
    double cursor = 0.0;
    for (const auto& s : segments) {
        if (s.begin != cursor) throw ConfigError("drift spec: segments must tile [0, 1] without gaps or overlap");
        if (!(s.end > s.begin)) throw ConfigError("drift spec: empty segment");
        if (s.active_categories == 0) throw ConfigError("drift spec: active_categories must be positive");
        if (!(s.zipf_exponent >= 0.0)) throw ConfigError("drift spec: zipf_exponent must be non-negative");
        cursor = s.end;
    }
    if (cursor != 1.0) throw ConfigError("drift spec: segments must end at 1");
    if (feature_map.block_scales.size() != 5) throw ConfigError("drift spec: block_scales needs 5 entries");
}

std::size_t DriftSpec::segment_at(double progress) const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (progress < segments[i].end) return i;
    }
    return segments.size() - 1;
}

void to_json(nlohmann::json& j, const DriftSpec& s) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& g : s.segments) {
        nlohmann::json x{{"begin", g.begin},
                         {"end", g.end},
                         {"zipf_exponent", g.zipf_exponent},
                         {"active_categories", g.active_categories},
                         {"scale", g.scale},
                         {"bias", g.bias},
                         {"orthogonal_to_previous", g.orthogonal_to_previous}};
        if (!g.weights.empty()) x["weights"] = g.weights;
        segs.push_back(std::move(x));
    }
    j = nlohmann::json{{"seed", s.seed},
                       {"feature_map",
                        {{"hidden_units", s.feature_map.hidden_units},
                         {"code_pairs", s.feature_map.code_pairs},
                         {"cross_terms", s.feature_map.cross_terms},
                         {"block_scales", s.feature_map.block_scales}}},
                       {"segments", segs}};
}

void from_json(const nlohmann::json& j, DriftSpec& s) {
    DriftSpec d;
    s.seed = j.value("seed", d.seed);
    s.feature_map = d.feature_map;
    if (j.contains("feature_map")) {
        const auto& f = j.at("feature_map");
        s.feature_map.hidden_units = f.value("hidden_units", d.feature_map.hidden_units);
        s.feature_map.code_pairs = f.value("code_pairs", d.feature_map.code_pairs);
        s.feature_map.cross_terms = f.value("cross_terms", d.feature_map.cross_terms);
        s.feature_map.block_scales = f.value("block_scales", d.feature_map.block_scales);
    }
    s.segments.clear();
    if (!j.contains("segments")) {
        s.segments = d.segments;
        return;
    }
    for (const auto& x : j.at("segments")) {
        DriftSegment g;
        g.begin = x.value("begin", 0.0);
        g.end = x.value("end", 1.0);
        g.zipf_exponent = x.value("zipf_exponent", g.zipf_exponent);
        g.active_categories = x.value("active_categories", g.active_categories);
        g.scale = x.value("scale", g.scale);
        g.bias = x.value("bias", g.bias);
        g.orthogonal_to_previous = x.value("orthogonal_to_previous", false);
        g.weights = x.value("weights", std::vector<double>{});
        s.segments.push_back(std::move(g));
    }
}

SyntheticProcess::SyntheticProcess(DriftSpec spec, StreamShape shape) : spec_(std::move(spec)), shape_(std::move(shape)) {
    spec_.validate();
    const std::size_t nc = shape_.num_continuous;
    const std::size_t nf = shape_.table_sizes.size();
    const FeatureMapSpec& fm = spec_.feature_map;
    if (nc == 0 || nf == 0) throw ConfigError("synthetic stream needs continuous and categorical features");
    if (fm.code_pairs > 0 && nf < 2) throw ConfigError("synthetic stream: code pairs need two categorical features");

    Rng rng(derive_seed(spec_.seed, 0x6665617475726573));
    hidden_w_.resize(fm.hidden_units * nc);
    hidden_b_.resize(fm.hidden_units);
    const double hs = 1.0 / std::sqrt(static_cast<double>(nc));
    for (double& w : hidden_w_) w = rng.normal() * hs;
    for (double& b : hidden_b_) b = rng.normal() * 0.5;
    for (std::size_t p = 0; p < fm.code_pairs; ++p) {
        const std::size_t a = rng.below(nf);
        std::size_t b = rng.below(nf - 1);
        if (b >= a) ++b;
        pairs_.emplace_back(a, b);
    }
    for (std::size_t p = 0; p < fm.cross_terms; ++p) crosses_.emplace_back(rng.below(nf), rng.below(nc));
    feature_dim_ = nc + fm.hidden_units + nf + fm.code_pairs + fm.cross_terms;
    const std::size_t block_end[5] = {nc, nc + fm.hidden_units, nc + fm.hidden_units + nf,
                                      nc + fm.hidden_units + nf + fm.code_pairs, feature_dim_};

    for (std::size_t s = 0; s < spec_.segments.size(); ++s) {
        const DriftSegment& seg = spec_.segments[s];
        std::vector<double> w;
        if (!seg.weights.empty()) {
            if (seg.weights.size() != feature_dim_) {
                throw ConfigError("drift spec: segment " + std::to_string(s) + " has " +
                                  std::to_string(seg.weights.size()) + " weights, feature map has " +
                                  std::to_string(feature_dim_));
            }
            w = seg.weights;
        } else {
            Rng wr(derive_seed(spec_.seed, 0x77000000 + s));
            w.resize(feature_dim_);
            std::size_t block = 0;
            for (std::size_t i = 0; i < feature_dim_; ++i) {
                while (i >= block_end[block]) ++block;
                w[i] = wr.normal() * fm.block_scales[block];
            }
            if (seg.orthogonal_to_previous) {
                for (std::size_t p = 0; p < s; ++p) {
                    const auto& q = weights_[p];
                    const double qq = std::inner_product(q.begin(), q.end(), q.begin(), 0.0);
                    if (qq == 0.0) continue;
                    const double c = std::inner_product(w.begin(), w.end(), q.begin(), 0.0) / qq;
                    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * q[i];
                }
            }
            const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
            if (norm > 0.0) {
                for (double& v : w) v *= seg.scale / norm;
            }
        }
        weights_.push_back(std::move(w));

        Popularity pop;
        const std::size_t k_max = *std::max_element(shape_.table_sizes.begin(), shape_.table_sizes.end());
        const std::size_t k = std::min(seg.active_categories, k_max);
        pop.cdf.resize(k);
        double acc = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            acc += std::pow(static_cast<double>(r + 1), -seg.zipf_exponent);
            pop.cdf[r] = acc;
        }
        for (double& c : pop.cdf) c /= acc;
        Rng pr(derive_seed(spec_.seed, 0x706f7000 + s));
        for (std::size_t f = 0; f < nf; ++f) {
            const std::uint64_t n = shape_.table_sizes[f];
            std::uint64_t a = 1;
            if (n > 1) {
                do {
                    a = 1 + pr.below(n - 1);
                } while (std::gcd(a, n) != 1);
            }
            pop.affine.emplace_back(a, pr.below(n));
        }
        popularity_.push_back(std::move(pop));
    }
}

double SyntheticProcess::code(std::size_t feature, std::uint32_t value) const noexcept {
    const std::uint64_t h = derive_seed(spec_.seed ^ (static_cast<std::uint64_t>(feature) << 40), value);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * std::sqrt(3.0);
}

void SyntheticProcess::features(std::span<const float> x, std::span<const std::uint32_t> c,
                                std::vector<double>& phi) const {
    const std::size_t nc = shape_.num_continuous;
    const std::size_t nf = shape_.table_sizes.size();
    const std::size_t hu = spec_.feature_map.hidden_units;
    phi.clear();
    for (std::size_t j = 0; j < nc; ++j) phi.push_back(x[j]);
    for (std::size_t h = 0; h < hu; ++h) {
        double z = hidden_b_[h];
        for (std::size_t j = 0; j < nc; ++j) z += hidden_w_[h * nc + j] * x[j];
        phi.push_back(z > 0.0 ? z : 0.0);
    }
    const std::size_t codes_at = phi.size();
    for (std::size_t f = 0; f < nf; ++f) phi.push_back(code(f, c[f]));
    for (const auto& [a, b] : pairs_) phi.push_back(phi[codes_at + a] * phi[codes_at + b]);
    for (const auto& [f, j] : crosses_) phi.push_back(phi[codes_at + f] * x[j]);
}

double SyntheticProcess::probability(std::size_t segment, std::span<const float> continuous,
                                     std::span<const std::uint32_t> categorical) const {
    thread_local std::vector<double> phi;
    features(continuous, categorical, phi);
    const auto& w = weights_[segment];
    const double logit = spec_.segments[segment].bias + std::inner_product(w.begin(), w.end(), phi.begin(), 0.0);
    return 1.0 / (1.0 + std::exp(-logit));
}

void SyntheticProcess::draw(std::size_t segment, Rng& rng, float& label, std::span<float> continuous,
                            std::span<std::uint32_t> categorical) const {
    for (float& v : continuous) v = static_cast<float>(rng.normal());
    const Popularity& pop = popularity_[segment];
    for (std::size_t f = 0; f < categorical.size(); ++f) {
        const double u = rng.uniform();
        auto it = std::lower_bound(pop.cdf.begin(), pop.cdf.end(), u);
        if (it == pop.cdf.end()) --it;
        const auto rank = static_cast<std::uint64_t>(it - pop.cdf.begin());
        const std::uint64_t n = shape_.table_sizes[f];
        const auto [a, b] = pop.affine[f];
        categorical[f] = static_cast<std::uint32_t>((a * (rank % n) + b) % n);
    }
    label = rng.bernoulli(probability(segment, continuous, categorical)) ? 1.0f : 0.0f;
}

SyntheticStream::SyntheticStream(std::shared_ptr<const SyntheticProcess> process, std::uint64_t n_samples,
                                 std::size_t batch_size, Part part, std::uint64_t progress_total)
    : process_(std::move(process)),
      n_samples_(n_samples),
      progress_total_(progress_total == 0 ? n_samples : progress_total),
      batch_size_(batch_size),
      part_(part),
      rng_(derive_seed(process_->spec().seed, part == Part::Train ? 0x747261696e : 0x74657374)) {
    if (batch_size_ == 0) throw ConfigError("batch size must be positive");
}

std::optional<MiniBatch> SyntheticStream::next() {
    if (produced_ >= n_samples_) return std::nullopt;
    const std::size_t nc = process_->shape().num_continuous;
    const std::size_t nf = process_->shape().table_sizes.size();
    MiniBatch batch;
    batch.num_continuous = nc;
    batch.num_categorical = nf;
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(batch_size_, n_samples_ - produced_));
    batch.labels.resize(n);
    batch.continuous.resize(n * nc);
    batch.categorical.resize(n * nf);
    const std::size_t last = process_->spec().segments.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t seg =
            part_ == Part::Test
                ? last
                : process_->spec().segment_at(static_cast<double>(produced_ + i) / static_cast<double>(progress_total_));
        process_->draw(seg, rng_, batch.labels[i], std::span<float>(batch.continuous).subspan(i * nc, nc),
                       std::span<std::uint32_t>(batch.categorical).subspan(i * nf, nf));
    }
    produced_ += n;
    return batch;
}

}  // namespace growprune
