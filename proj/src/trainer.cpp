// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "growprune/errors.hpp"
#include "growprune/random.hpp"

namespace growprune {

void TrainOptions::validate(const ModelConfig& model) const {
    plan.validate();
    optimizer.validate();
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (total_samples == 0) throw ConfigError("the training stream is empty");
    if (score_window_batches == 0) throw ConfigError("score_window_batches must be positive");
    if (growth_init == GrowthInit::Constant && !std::isfinite(growth_constant)) {
        throw ConfigError("growth constant must be finite");
    }
    const std::size_t n = model.fc_layer_count();
    for (std::size_t l : prunable_layers) {
        if (l + 1 >= n) throw ConfigError("prunable layer index out of range (the output layer cannot be pruned)");
    }
}

void compute_gradients(const ModelState& params, const MiniBatch& batch, StepWorkspace& ws,
                       ImportanceAccumulator* scores) {
    forward(params, batch, ws.cache);
    backward(params, ws.cache, batch.labels, ws.grads);
    if (scores != nullptr) accumulate_scores(*scores, ws.grads, params);
}

void SequentialExecutor::run_round(TrainingSession& session, std::span<const RoundBatch> batches,
                                   const std::function<void()>& concurrent) {
    for (const RoundBatch& rb : batches) {
        compute_gradients(session.state(), *rb.batch, ws_, rb.score ? &session.scores() : nullptr);
        session.optimizer().apply(session.state(), ws_.grads);
        ++session.state().step;
    }
    if (concurrent) concurrent();
}

namespace {

std::vector<std::size_t> prunable_or_default(const TrainOptions& o, const ModelConfig& c) {
    return o.prunable_layers.empty() ? default_prunable_layers(c) : o.prunable_layers;
}

PruneDirective directive_for(const TrainOptions& o, const ModelConfig& c) {
    if (o.plan.prune_boundaries() == 0 && o.plan.initial_state() == PhaseState::Dense) return {};
    return PruneDirective::make(o.plan.beta, c, prunable_or_default(o, c));
}

}  // namespace

TrainingSession::TrainingSession(ModelState initial, TrainOptions options)
    : state_(std::move(initial)),
      options_((options.validate(state_.config), std::move(options))),
      optimizer_(options_.optimizer, state_),
      tracker_(options_.plan, options_.total_samples),
      directive_(directive_for(options_, state_.config)),
      scores_(ImportanceAccumulator::for_model(state_, prunable_or_default(options_, state_.config))) {
    if (options_.prunable_layers.empty()) options_.prunable_layers = default_prunable_layers(state_.config);
    const std::uint64_t w = options_.window_size != 0 ? options_.window_size
                                                      : std::max<std::uint64_t>(1, options_.total_samples / 20);
    windows_ = plan_windows(options_.total_samples, w);

    if (options_.plan.initial_state() == PhaseState::Sparse) {
        const auto masks = random_masks(directive_, state_.config, options_.mask_seed);
        SparsityEvent ev = apply_prune(state_, masks);
        ev.kind = "initial_mask";
        ev.samples = 0;
        events_.push_back(std::move(ev));
    }
}

void TrainingSession::fetch_until(BatchSource& source, std::uint64_t target) {
    target = std::min(target, options_.total_samples);
    while (fetched_ < target && !source_done_) {
        auto b = source.next();
        if (!b || b->empty()) {
            source_done_ = true;
            break;
        }
        const std::uint64_t room = options_.total_samples - fetched_;
        if (b->size() > room) *b = b->slice(0, static_cast<std::size_t>(room));
        const std::uint64_t n = b->size();
        buffer_.push_back({fetched_, std::move(*b)});
        fetched_ += n;
    }
}

const MiniBatch* TrainingSession::batch_at(std::uint64_t begin) const {
    for (const Buffered& b : buffer_) {
        if (b.begin == begin) return &b.batch;
        if (b.begin > begin) break;
    }
    return nullptr;
}

void TrainingSession::evaluate_through(BatchSource& source, std::uint64_t end) {
    while (evaluated_ < end && next_window_ < windows_.size()) {
        const WindowRange& w = windows_[next_window_];
        fetch_until(source, w.end);
        const std::uint64_t stop = std::min(w.end, fetched_);
        if (stop <= w.begin) return;
        EvalResult r;
        double window_loss = 0.0;
        for (const Buffered& b : buffer_) {
            const std::uint64_t b_end = b.begin + b.batch.size();
            if (b_end <= w.begin || b.begin >= stop) continue;
            const auto lo = static_cast<std::size_t>(std::max(w.begin, b.begin) - b.begin);
            const auto hi = static_cast<std::size_t>(std::min(stop, b_end) - b.begin);
            EvalResult part;
            if (lo == 0 && hi == b.batch.size()) {
                part = evaluate(state_, std::span<const MiniBatch>(&b.batch, 1));
            } else {
                const MiniBatch piece = b.batch.slice(lo, hi);
                part = evaluate(state_, std::span<const MiniBatch>(&piece, 1));
            }
            window_loss += part.ce * static_cast<double>(part.samples);
            r.samples += part.samples;
            r.correct += part.correct;
            r.positives += part.positives;
        }
        r.ce = window_loss / static_cast<double>(r.samples);
        r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.samples);

        loss_sum_ += window_loss;
        progressive_.samples += r.samples;
        progressive_.correct += r.correct;
        progressive_.positives += r.positives;

        WindowRecord rec;
        rec.index = w.index;
        rec.start_sample = w.begin;
        rec.end_sample = stop;
        rec.ce = r.ce;
        rec.accuracy = r.accuracy;
        rec.truncated = w.truncated || stop < w.end;
        pending_.push_back(rec);
        evaluated_ = stop;
        ++next_window_;
    }
}

void TrainingSession::flush_windows(bool all) {
    std::size_t done = 0;
    for (WindowRecord& rec : pending_) {
        if (!all && rec.end_sample > trained_) break;
        rec.cumulative_flops = ledger_.cumulative_flops();
        ledger_.record_window(rec);
        ++done;
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(done));
}

bool TrainingSession::scoring(std::uint64_t seen) const {
    if (tracker_.state() != PhaseState::Dense) return false;
    const auto next = tracker_.next_prune_sample();
    if (!next || *next <= seen) return false;
    return *next - seen <= static_cast<std::uint64_t>(options_.score_window_batches) * options_.batch_size;
}

void TrainingSession::prune() {
    std::vector<RowMask> masks;
    const bool scored = scores_.window_batches > 0;
    if (scored) {
        masks = build_masks(scores_, directive_, state_.config);
    } else {
        masks = random_masks(directive_, state_.config, derive_seed(options_.mask_seed, events_.size() + 1));
    }
    SparsityEvent ev = apply_prune(state_, masks, scored ? &scores_ : nullptr);
    ev.samples = trained_;
    events_.push_back(std::move(ev));
    scores_.reset();
}

void TrainingSession::grow() {
    SparsityEvent ev = apply_growth(state_, &before_growth_);
    ev.samples = trained_;
    optimizer_.on_growth(before_growth_);
    if (options_.growth_init == GrowthInit::Constant && ev.kind == "grow") {
        const auto c = static_cast<float>(options_.growth_constant);
        for (std::size_t l = 0; l < state_.layers.size(); ++l) {
            auto& layer = state_.layers[l];
            for (std::size_t o = 0; o < layer.outputs(); ++o) {
                if (before_growth_[l].keep(o)) continue;
                for (float& w : layer.weight.row(o)) std::atomic_ref<float>(w).store(c, std::memory_order_relaxed);
            }
        }
    }
    events_.push_back(std::move(ev));
    scores_.reset();
}

void TrainingSession::train(BatchSource& source, RoundExecutor& executor) {
    const std::size_t capacity = std::max<std::size_t>(1, executor.round_capacity());
    std::vector<RoundBatch> round;
    std::size_t concurrent_growths = 0;
    while (true) {
        round.clear();
        std::size_t pending_growths = 0;
        std::uint64_t seen = trained_;
        std::uint64_t flops = 0;
        while (round.size() < capacity) {
            fetch_until(source, seen + 1);
            const MiniBatch* b = batch_at(seen);
            if (b == nullptr) break;
            evaluate_through(source, seen + b->size());
            b = batch_at(seen);  // the buffer may have grown
            round.push_back({b, scoring(seen)});
            flops += account_flops(b->size(), state_);
            const auto actions = advance(options_.plan, seen, seen + b->size(), options_.total_samples);
            seen += b->size();
            bool stop = false;
            for (PhaseAction a : actions) {
                if (a == PhaseAction::TriggerPrune || executor.growth_barrier()) {
                    stop = true;
                } else {
                    ++pending_growths;
                }
            }
            if (stop) break;
        }
        if (round.empty()) break;

        std::function<void()> concurrent;
        if (pending_growths > 0) {
            concurrent = [this, pending_growths] {
                for (std::size_t i = 0; i < pending_growths; ++i) grow();
            };
            concurrent_growths += pending_growths;
        }
        executor.run_round(*this, round, concurrent);
        ledger_.add_flops(flops);
        trained_ = seen;

        bool grew = pending_growths > 0;
        for (PhaseAction a : tracker_.advance(trained_)) {
            if (a == PhaseAction::TriggerPrune) {
                prune();
            } else if (concurrent_growths > 0) {
                --concurrent_growths;
            } else {
                grow();
                grew = true;
            }
        }
        executor.after_round(*this, grew);
        flush_windows(false);
        while (!buffer_.empty()) {
            const Buffered& f = buffer_.front();
            const std::uint64_t end = f.begin + f.batch.size();
            if (end > trained_ || end > evaluated_) break;
            buffer_.pop_front();
        }
    }
    flush_windows(true);
}

TrainResult TrainingSession::finish() && {
    TrainResult r;
    flush_windows(true);
    r.samples_trained = trained_;
    r.progressive = progressive_;
    if (progressive_.samples > 0) {
        r.progressive.ce = loss_sum_ / static_cast<double>(progressive_.samples);
        r.progressive.accuracy =
            static_cast<double>(progressive_.correct) / static_cast<double>(progressive_.samples);
    }
    r.state = std::move(state_);
    r.ledger = std::move(ledger_);
    r.events = std::move(events_);
    return r;
}

TrainResult train(ModelState initial, BatchSource& source, const TrainOptions& options) {
    const DenormalGuard guard(options.optimizer.flush_to_zero);
    TrainingSession session(std::move(initial), options);
    SequentialExecutor exec;
    session.train(source, exec);
    return std::move(session).finish();
}

}  // namespace growprune
