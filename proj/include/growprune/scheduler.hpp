// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training schemes as piecewise dense/sparse schedules over the fraction of
// training samples consumed.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace growprune {

enum class Scheme { Baseline, PruningOnly, GrowthOnly, Dsd, Alternate, InitialCapacity };
enum class PhaseState { Dense, Sparse };
enum class PhaseAction { TriggerPrune, TriggerGrowth };

std::string to_string(Scheme s);
std::string to_string(PhaseState s);
std::string to_string(PhaseAction a);
Scheme parse_scheme(const std::string& name);

struct Boundary {
    double progress = 0.0;
    PhaseState state = PhaseState::Dense;

    friend bool operator==(const Boundary&, const Boundary&) = default;
};

struct PhasePlan {
    Scheme scheme = Scheme::Baseline;
    double beta = 0.0;  // pruned fraction used in every sparse phase
    std::vector<Boundary> boundaries;

    /// Throws ConfigError unless boundaries start at 0, strictly increase,
    /// stay within [0, 1) and alternate states.
    void validate() const;

    [[nodiscard]] PhaseState initial_state() const { return boundaries.front().state; }
    [[nodiscard]] PhaseState final_state() const { return boundaries.back().state; }
    [[nodiscard]] bool ends_dense() const { return final_state() == PhaseState::Dense; }
    /// False only for schemes that finish training with a sparse model.
    [[nodiscard]] bool dense_compliant() const { return ends_dense(); }
    /// Total fraction of progress spent sparse.
    [[nodiscard]] double sparse_fraction() const;
    [[nodiscard]] std::size_t prune_boundaries() const;
    [[nodiscard]] std::size_t growth_boundaries() const;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Canonical schedules. Alternate splits the sparse fraction f into two equal
/// sparse phases separated and surrounded by three equal dense phases; with
/// f = 0.4 every phase is 20% of training.
PhasePlan make_plan(Scheme scheme, double beta, double sparse_fraction);

/// Alternate schedule with explicit sparse intervals, e.g. {[0.20,0.35), [0.50,0.65)}.
PhasePlan make_alternate_plan(double beta, const std::vector<std::pair<double, double>>& sparse_intervals);

/// Alternate schedule sparse on [0.20, 0.35) and [0.50, 0.65).
PhasePlan make_industrial_plan(double beta);

/// Sparse with beta = 1 - initial_fraction on [0, warmup_progress), dense after.
/// initial_fraction == 1 degenerates to the baseline plan.
PhasePlan make_initial_capacity_plan(double initial_fraction, double warmup_progress = 0.1);

/// Sample index at which a boundary fires: round(progress * total).
std::uint64_t boundary_sample(double progress, std::uint64_t total_samples);

/// Tracks which boundaries have fired. Boundaries are checked after every
/// batch; all boundaries crossed by the batch fire in order.
class PhaseTracker {
public:
    PhaseTracker(PhasePlan plan, std::uint64_t total_samples);

    std::vector<PhaseAction> advance(std::uint64_t samples_seen);

    [[nodiscard]] PhaseState state() const noexcept { return state_; }
    [[nodiscard]] const PhasePlan& plan() const noexcept { return plan_; }
    [[nodiscard]] std::uint64_t total_samples() const noexcept { return total_; }
    /// Sample index of the next dense -> sparse boundary not yet fired.
    [[nodiscard]] std::optional<std::uint64_t> next_prune_sample() const;

private:
    PhasePlan plan_;
    std::uint64_t total_;
    std::size_t next_ = 1;
    std::uint64_t last_seen_ = 0;
    PhaseState state_;
};

/// Stateless form: actions fired when progress moves from `previous` to `now` samples.
std::vector<PhaseAction> advance(const PhasePlan& plan, std::uint64_t previous, std::uint64_t now,
                                 std::uint64_t total_samples);

}  // namespace growprune
