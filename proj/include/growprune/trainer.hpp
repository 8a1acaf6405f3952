// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-pass training driver. Each look-ahead window of the stream is
// evaluated before any of its samples is trained on (progressive validation),
// the phase plan fires prune and growth events between batches, and every
// batch is charged to the FLOPs ledger under the masks it was trained with.
//
// Batches are trained in rounds. The sequential executor uses rounds of one
// batch; the asynchronous simulator (async_sim.hpp) runs a round's batches
// on concurrent workers against the same session.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "growprune/data.hpp"
#include "growprune/metrics.hpp"
#include "growprune/model.hpp"
#include "growprune/optimizer.hpp"
#include "growprune/scheduler.hpp"
#include "growprune/sparsity.hpp"

namespace growprune {

enum class GrowthInit { Zero, Constant };

struct TrainOptions {
    PhasePlan plan;
    OptimizerConfig optimizer;
    /// FC layer indices eligible for pruning; empty selects the defaults.
    std::vector<std::size_t> prunable_layers;
    /// Dense batches scored before each prune event.
    std::size_t score_window_batches = 100;
    /// Nominal batch size of the source; sizes the scoring window.
    std::size_t batch_size = 128;
    /// Length of the training stream; phase boundaries are fractions of it.
    std::uint64_t total_samples = 0;
    /// Look-ahead window length; 0 selects total_samples / 20.
    std::uint64_t window_size = 0;
    /// Seeds random masks (plans that start sparse).
    std::uint64_t mask_seed = 0;
    /// Regrown weight rows are set to this value; biases stay zero.
    GrowthInit growth_init = GrowthInit::Zero;
    double growth_constant = 0.0;

    void validate(const ModelConfig& model) const;
};

struct TrainResult {
    ModelState state;
    MetricsLedger ledger;
    std::vector<SparsityEvent> events;
    EvalResult progressive;  // over every evaluated window
    std::uint64_t samples_trained = 0;
};

/// Scratch buffers for one forward/backward pass.
struct StepWorkspace {
    BatchActivations<float> cache;
    Gradients<float> grads;
};

/// Forward and backward of `batch` on `params`; adds Taylor scores to `scores`
/// when given. Leaves the gradients in `ws.grads`.
void compute_gradients(const ModelState& params, const MiniBatch& batch, StepWorkspace& ws,
                       ImportanceAccumulator* scores);

struct RoundBatch {
    const MiniBatch* batch = nullptr;
    bool score = false;  // inside the scoring window before a prune
};

class TrainingSession;

class RoundExecutor {
public:
    virtual ~RoundExecutor() = default;
    /// Largest number of batches per round.
    [[nodiscard]] virtual std::size_t round_capacity() const = 0;
    /// When false, growth crossed inside a round runs concurrently with it.
    [[nodiscard]] virtual bool growth_barrier() const { return true; }
    /// Trains the round's batches. `concurrent`, when set, must run on the
    /// calling thread while the batches are being trained.
    virtual void run_round(TrainingSession& session, std::span<const RoundBatch> batches,
                           const std::function<void()>& concurrent) = 0;
    /// Called after every round, once the round's events have fired.
    virtual void after_round(TrainingSession& /*session*/, bool /*growth_in_round*/) {}
};

/// Rounds of one batch trained in place on the calling thread.
class SequentialExecutor final : public RoundExecutor {
public:
    [[nodiscard]] std::size_t round_capacity() const override { return 1; }
    void run_round(TrainingSession& session, std::span<const RoundBatch> batches,
                   const std::function<void()>& concurrent) override;

private:
    StepWorkspace ws_;
};

class TrainingSession {
public:
    TrainingSession(ModelState initial, TrainOptions options);

    /// Consumes `source` to the end (or total_samples, whichever comes first).
    void train(BatchSource& source, RoundExecutor& executor);

    [[nodiscard]] TrainResult finish() &&;

    [[nodiscard]] ModelState& state() noexcept { return state_; }
    [[nodiscard]] const ModelState& state() const noexcept { return state_; }
    [[nodiscard]] Optimizer<float>& optimizer() noexcept { return optimizer_; }
    [[nodiscard]] ImportanceAccumulator& scores() noexcept { return scores_; }
    [[nodiscard]] const TrainOptions& options() const noexcept { return options_; }
    [[nodiscard]] const std::vector<SparsityEvent>& events() const noexcept { return events_; }
    [[nodiscard]] std::uint64_t samples_trained() const noexcept { return trained_; }
    /// Masks that were in effect before the most recent growth event.
    [[nodiscard]] const std::vector<RowMask>& masks_before_growth() const noexcept { return before_growth_; }

    /// Growth event: masks become all-keep, regrown rows start from the
    /// configured initial value and optimizer state follows the regrow policy.
    void grow();
    void prune();

private:
    struct Buffered {
        std::uint64_t begin;
        MiniBatch batch;
    };

    void fetch_until(BatchSource& source, std::uint64_t target);
    void evaluate_through(BatchSource& source, std::uint64_t end);
    void flush_windows(bool all);
    const MiniBatch* batch_at(std::uint64_t begin) const;
    bool scoring(std::uint64_t seen) const;

    ModelState state_;
    TrainOptions options_;
    Optimizer<float> optimizer_;
    PhaseTracker tracker_;
    PruneDirective directive_;
    ImportanceAccumulator scores_;
    MetricsLedger ledger_;
    std::vector<SparsityEvent> events_;
    std::vector<RowMask> before_growth_;

    std::vector<WindowRange> windows_;
    std::size_t next_window_ = 0;
    std::vector<WindowRecord> pending_;
    double loss_sum_ = 0.0;
    EvalResult progressive_;

    std::deque<Buffered> buffer_;
    std::uint64_t fetched_ = 0;
    std::uint64_t evaluated_ = 0;
    std::uint64_t trained_ = 0;
    bool source_done_ = false;
};

/// Sequential single-pass training of `initial` over `source`.
TrainResult train(ModelState initial, BatchSource& source, const TrainOptions& options);

}  // namespace growprune
