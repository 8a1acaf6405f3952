// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/async_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

#include "growprune/errors.hpp"

namespace growprune {

void AsyncOptions::validate() const {
    if (workers == 0) throw ConfigError("async: at least one worker is required");
}

namespace {

double relaxed(const float& x) {
    return static_cast<double>(std::atomic_ref<float>(const_cast<float&>(x)).load(std::memory_order_relaxed));
}

class HogwildExecutor final : public RoundExecutor {
public:
    HogwildExecutor(const AsyncOptions& options, const TrainingSession& session) : options_(options) {
        workers_.resize(options_.workers);
        for (Worker& w : workers_) {
            w.scores = ImportanceAccumulator::for_model(session.state(), session.options().prunable_layers);
        }
        layers_ = session.options().prunable_layers;
        track_masked(session.state());
        seen_events_ = session.events().size();
        record(session, false, false);
    }

    [[nodiscard]] std::size_t round_capacity() const override { return options_.workers; }
    [[nodiscard]] bool growth_barrier() const override { return options_.growth_barrier; }

    void run_round(TrainingSession& session, std::span<const RoundBatch> batches,
                   const std::function<void()>& concurrent) override {
        ModelState& shared = session.state();
        for (std::size_t i = 0; i < batches.size(); ++i) {
            Worker& w = workers_[i];
            if (!w.valid || w.version + options_.staleness < shared.step) {
                w.snapshot = shared;
                w.version = shared.step;
                w.valid = true;
                w.masks.clear();
                for (const auto& l : w.snapshot.layers) w.masks.push_back(l.mask);
            }
        }
        const bool ftz = session.optimizer().config().flush_to_zero;
        std::vector<std::thread> threads;
        threads.reserve(batches.size());
        for (std::size_t i = 0; i < batches.size(); ++i) {
            threads.emplace_back([this, i, ftz, &session, &shared, &batches] {
                const DenormalGuard guard(ftz);
                Worker& w = workers_[i];
                const bool score = batches[i].score && w.snapshot.dense();
                compute_gradients(w.snapshot, *batches[i].batch, w.ws, score ? &w.scores : nullptr);
                w.grad_norm = tracked_grad_norms(w.ws.grads);
                session.optimizer().apply_relaxed(shared, w.ws.grads, &w.masks);
            });
        }
        if (concurrent) concurrent();
        for (auto& t : threads) t.join();

        for (std::size_t i = 0; i < batches.size(); ++i) {
            Worker& w = workers_[i];
            if (w.scores.window_batches > 0) {
                session.scores().merge(w.scores);
                w.scores.reset();
            }
        }
        shared.step += batches.size();
        const double lr = session.optimizer().config().learning_rate;
        round_bound_.assign(layers_.size(), 0.0);
        for (std::size_t i = 0; i < batches.size(); ++i) {
            for (std::size_t k = 0; k < layers_.size(); ++k) round_bound_[k] += lr * workers_[i].grad_norm[k];
        }
    }

    void after_round(TrainingSession& session, bool /*growth_in_round*/) override {
        bool pruned = false;
        bool grew = false;
        const auto& events = session.events();
        for (std::size_t e = seen_events_; e < events.size(); ++e) {
            if (events[e].kind == "prune" || events[e].kind == "initial_mask") {
                pruned = true;
            } else if (events[e].kind == "grow") {
                grew = true;
            }
        }
        seen_events_ = events.size();
        if (pruned) {
            // Prunes always act as barriers: every worker restarts from the new model.
            for (Worker& w : workers_) w.valid = false;
            track_masked(session.state());
        } else if (grew && options_.growth_barrier) {
            for (Worker& w : workers_) w.valid = false;
        }
        ++round_;
        record(session, pruned, grew);
    }

    std::vector<TraceRow> take_trace() { return std::move(trace_); }
    [[nodiscard]] const std::vector<std::size_t>& layers() const { return layers_; }

private:
    struct Worker {
        ModelState snapshot;
        std::vector<RowMask> masks;
        std::uint64_t version = 0;
        bool valid = false;
        StepWorkspace ws;
        ImportanceAccumulator scores;
        std::vector<double> grad_norm;
    };

    void track_masked(const ModelState& state) {
        tracked_.assign(layers_.size(), {});
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const auto& layer = state.layers[layers_[k]];
            for (std::size_t o = 0; o < layer.outputs(); ++o) {
                if (!layer.mask.keep(o)) tracked_[k].push_back(o);
            }
        }
        previous_.clear();
        previous_norm_.clear();
    }

    std::vector<double> tracked_grad_norms(const Gradients<float>& grads) const {
        std::vector<double> out(layers_.size(), 0.0);
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            double s = 0.0;
            for (std::size_t o : tracked_[k]) {
                for (float g : grads.weight[layers_[k]].row(o)) s += static_cast<double>(g) * g;
            }
            out[k] = std::sqrt(s);
        }
        return out;
    }

    void record(const TrainingSession& session, bool pruned, bool grew) {
        const ModelState& state = session.state();
        TraceRow row;
        row.round = round_;
        row.step = state.step;
        row.samples = session.samples_trained();
        row.prune = pruned;
        row.grow = grew;
        row.bound = round_bound_.empty() ? std::vector<double>(layers_.size(), 0.0) : round_bound_;
        std::vector<float> values;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const auto& layer = state.layers[layers_[k]];
            double s = 0.0;
            for (std::size_t o : tracked_[k]) {
                for (const float& w : layer.weight.row(o)) {
                    const double v = relaxed(w);
                    s += v * v;
                    values.push_back(static_cast<float>(v));
                }
            }
            row.norm.push_back(std::sqrt(s));
        }
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            row.jump.push_back(previous_norm_.empty() ? 0.0 : std::fabs(row.norm[k] - previous_norm_[k]));
        }
        if (previous_.size() == values.size()) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                row.max_delta = std::max(row.max_delta, std::fabs(static_cast<double>(values[i]) - previous_[i]));
            }
        }
        previous_ = std::move(values);
        previous_norm_ = row.norm;
        trace_.push_back(std::move(row));
    }

    AsyncOptions options_;
    std::vector<Worker> workers_;
    std::vector<std::size_t> layers_;
    std::vector<std::vector<std::size_t>> tracked_;
    std::vector<float> previous_;
    std::vector<double> previous_norm_;
    std::vector<double> round_bound_;
    std::vector<TraceRow> trace_;
    std::size_t seen_events_ = 0;
    std::uint64_t round_ = 0;
};

}  // namespace

AsyncResult run_async(ModelState initial, BatchSource& source, const TrainOptions& options,
                      const AsyncOptions& async) {
    async.validate();
    if (options.plan.growth_boundaries() == 0) throw ConfigError("async: the phase plan has no growth event");
    const DenormalGuard guard(options.optimizer.flush_to_zero);
    TrainingSession session(std::move(initial), options);
    HogwildExecutor exec(async, session);
    session.train(source, exec);
    AsyncResult r;
    for (std::size_t l : exec.layers()) r.layers.push_back(session.state().layers[l].name);
    r.trace = exec.take_trace();
    r.train = std::move(session).finish();
    return r;
}

void write_trace_csv(std::ostream& out, const AsyncResult& result) {
    out << "round,step,samples,prune,grow";
    for (const auto& n : result.layers) out << ',' << n << ".norm," << n << ".jump," << n << ".bound";
    out << ",max_delta\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const TraceRow& r : result.trace) {
        out << r.round << ',' << r.step << ',' << r.samples << ',' << (r.prune ? 1 : 0) << ',' << (r.grow ? 1 : 0);
        for (std::size_t k = 0; k < result.layers.size(); ++k) {
            out << ',' << r.norm[k] << ',' << r.jump[k] << ',' << r.bound[k];
        }
        out << ',' << r.max_delta << '\n';
    }
}

}  // namespace growprune
