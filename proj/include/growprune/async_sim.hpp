// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hogwild-style simulation of asynchronous data-parallel training. k worker
// threads each take one batch per round, compute gradients on a private
// parameter snapshot that may lag the shared model, and apply the update to
// the shared model with relaxed atomic element accesses and no locking. The
// coordinator (the calling thread) owns evaluation, FLOPs accounting and
// prune/growth events.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "growprune/trainer.hpp"

namespace growprune {

struct AsyncOptions {
    std::size_t workers = 1;
    /// Steps a worker snapshot may lag the shared model before refreshing.
    std::size_t staleness = 0;
    /// Stop all workers at growth events. Prune events always stop them.
    bool growth_barrier = true;

    void validate() const;
};

/// Regrown-row statistics after one round. Rows are those removed by the most
/// recent prune (or initial mask); only weight rows are measured.
struct TraceRow {
    std::uint64_t round = 0;
    std::uint64_t step = 0;
    std::uint64_t samples = 0;
    bool prune = false;
    bool grow = false;
    std::vector<double> norm;   // per prunable layer, L2 norm over the tracked rows
    std::vector<double> jump;   // |norm - previous norm|
    std::vector<double> bound;  // lr * sum of the round's tracked-row gradient norms
    double max_delta = 0.0;     // largest element change of any tracked weight
};

struct AsyncResult {
    TrainResult train;
    std::vector<std::string> layers;  // names of the traced layers
    std::vector<TraceRow> trace;
};

AsyncResult run_async(ModelState initial, BatchSource& source, const TrainOptions& options,
                      const AsyncOptions& async);

/// Columns: round, step, samples, prune, grow, then <layer>.norm, <layer>.jump
/// and <layer>.bound per traced layer, then max_delta.
void write_trace_csv(std::ostream& out, const AsyncResult& result);

}  // namespace growprune
