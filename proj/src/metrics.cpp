// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "growprune/errors.hpp"

namespace growprune {

template <typename T>
EvalResult evaluate(const BasicModelState<T>& state, std::span<const MiniBatch> batches, std::vector<double>* losses) {
    EvalResult r;
    double loss_sum = 0.0;
    BatchActivations<T> cache;
    for (const MiniBatch& b : batches) {
        const auto preds = forward(state, b, cache);
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double p = static_cast<double>(preds[i]);
            const double y = b.labels[i];
            const double term = bce_term(p, y);
            loss_sum += term;
            if (losses != nullptr) losses->push_back(term);
            r.correct += ((p >= 0.5) == (y >= 0.5)) ? 1 : 0;
            r.positives += y;
        }
        r.samples += b.size();
    }
    if (r.samples > 0) {
        r.ce = loss_sum / static_cast<double>(r.samples);
        r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.samples);
    }
    return r;
}

std::vector<WindowRange> plan_windows(std::uint64_t total, std::uint64_t window_size) {
    if (window_size == 0) throw ConfigError("window size must be positive");
    std::vector<WindowRange> out;
    for (std::uint64_t begin = 0; begin < total; begin += window_size) {
        WindowRange w;
        w.index = out.size();
        w.begin = begin;
        w.end = std::min(total, begin + window_size);
        w.truncated = w.end - w.begin < window_size;
        out.push_back(w);
    }
    return out;
}

double normalized_ce(std::span<const double> losses, std::span<const float> labels) {
    if (losses.size() != labels.size() || losses.empty()) {
        throw ShapeError("normalized_ce: need one loss per label and a non-empty stream");
    }
    double loss_sum = 0.0;
    double pos = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        loss_sum += losses[i];
        pos += labels[i];
    }
    const double n = static_cast<double>(losses.size());
    const double r = pos / n;
    if (!(r > 0.0 && r < 1.0)) throw Error("normalized_ce: label base rate must lie strictly between 0 and 1");
    const double background = -(r * std::log(r) + (1.0 - r) * std::log(1.0 - r));
    return (loss_sum / n) / background;
}

RelativeMetric relative_metric(double experimental, double baseline) {
    if (baseline == 0.0) throw Error("relative_metric: baseline is zero");
    RelativeMetric m;
    m.percent = (experimental / baseline - 1.0) * 100.0;
    m.significant = std::fabs(m.percent) > kSignificancePercent;
    return m;
}

std::uint64_t fc_layer_training_flops(std::size_t inputs, std::size_t active_outputs) noexcept {
    return 6ULL * inputs * active_outputs;
}

FlopsBreakdown per_sample_flops(const ModelConfig& config, std::span<const std::size_t> active_outputs,
                                std::span<const std::size_t> prunable_layers) {
    const auto shapes = config.fc_shapes();
    if (active_outputs.size() != shapes.size()) throw ShapeError("per_sample_flops: one active count per FC layer");
    FlopsBreakdown b;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const std::uint64_t c = fc_layer_training_flops(shapes[l].inputs, active_outputs[l]);
        const bool prunable =
            std::find(prunable_layers.begin(), prunable_layers.end(), l) != prunable_layers.end();
        (prunable ? b.prunable_fc : b.fixed_fc) += c;
    }
    b.embedding = static_cast<std::uint64_t>(config.embedding_dim) * config.num_categorical;
    b.interaction = static_cast<std::uint64_t>(config.interaction_pairs()) * 2 * config.embedding_dim;
    return b;
}

template <typename T>
FlopsBreakdown per_sample_flops(const BasicModelState<T>& state, std::span<const std::size_t> prunable_layers) {
    std::vector<std::size_t> active;
    for (const auto& l : state.layers) active.push_back(l.mask.active_count());
    return per_sample_flops(state.config, active, prunable_layers);
}

template <typename T>
std::uint64_t account_flops(std::size_t batch_size, const BasicModelState<T>& state) {
    return static_cast<std::uint64_t>(batch_size) * per_sample_flops(state, {}).total();
}

void MetricsLedger::record_window(const WindowRecord& record) {
    const std::uint64_t expected_start = windows_.empty() ? 0 : windows_.back().end_sample;
    if (record.start_sample != expected_start || record.end_sample <= record.start_sample) {
        throw Error("metrics ledger: windows must be contiguous and non-empty");
    }
    if (!windows_.empty() && record.cumulative_flops < windows_.back().cumulative_flops) {
        throw Error("metrics ledger: cumulative FLOPs decreased");
    }
    windows_.push_back(record);
}

void MetricsLedger::write_csv(std::ostream& out) const {
    out << "window_idx,start_sample,end_sample,window_ce,window_acc,cumulative_flops\n";
    out << std::setprecision(17);
    for (const auto& w : windows_) {
        out << w.index << ',' << w.start_sample << ',' << w.end_sample << ',' << w.ce << ',' << w.accuracy << ','
            << w.cumulative_flops << '\n';
    }
}

std::vector<WindowRecord> MetricsLedger::read_csv(std::istream& in) {
    std::vector<WindowRecord> out;
    std::string line;
    if (!std::getline(in, line)) throw DataError("metrics csv: missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        WindowRecord w;
        char c1, c2, c3, c4, c5;
        if (!(ss >> w.index >> c1 >> w.start_sample >> c2 >> w.end_sample >> c3 >> w.ce >> c4 >> w.accuracy >> c5 >>
              w.cumulative_flops)) {
            throw DataError("metrics csv: malformed row '" + line + "'");
        }
        out.push_back(w);
    }
    return out;
}

template EvalResult evaluate(const BasicModelState<float>&, std::span<const MiniBatch>, std::vector<double>*);
template EvalResult evaluate(const BasicModelState<double>&, std::span<const MiniBatch>, std::vector<double>*);
template FlopsBreakdown per_sample_flops(const BasicModelState<float>&, std::span<const std::size_t>);
template FlopsBreakdown per_sample_flops(const BasicModelState<double>&, std::span<const std::size_t>);
template std::uint64_t account_flops(std::size_t, const BasicModelState<float>&);
template std::uint64_t account_flops(std::size_t, const BasicModelState<double>&);

}  // namespace growprune
