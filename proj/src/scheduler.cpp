// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/scheduler.hpp"

#include <cmath>

#include "growprune/errors.hpp"

namespace growprune {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::Baseline: return "baseline";
        case Scheme::PruningOnly: return "pruning_only";
        case Scheme::GrowthOnly: return "growth_only";
        case Scheme::Dsd: return "dsd";
        case Scheme::Alternate: return "alternate";
        case Scheme::InitialCapacity: return "initial_capacity";
    }
    return "unknown";
}

std::string to_string(PhaseState s) { return s == PhaseState::Dense ? "dense" : "sparse"; }

std::string to_string(PhaseAction a) { return a == PhaseAction::TriggerPrune ? "trigger_prune" : "trigger_growth"; }

Scheme parse_scheme(const std::string& name) {
    for (Scheme s : {Scheme::Baseline, Scheme::PruningOnly, Scheme::GrowthOnly, Scheme::Dsd, Scheme::Alternate,
                     Scheme::InitialCapacity}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown scheme '" + name + "'");
}

void PhasePlan::validate() const {
    if (boundaries.empty() || boundaries.front().progress != 0.0) {
        throw ConfigError("phase plan must start at progress 0");
    }
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        if (!(boundaries[i].progress > boundaries[i - 1].progress)) {
            throw ConfigError("phase plan boundaries must be strictly increasing");
        }
        if (boundaries[i].progress >= 1.0) throw ConfigError("phase plan boundary at or beyond the end of training");
        if (boundaries[i].state == boundaries[i - 1].state) {
            throw ConfigError("phase plan boundaries must alternate between dense and sparse");
        }
    }
    const bool any_sparse = prune_boundaries() > 0 || initial_state() == PhaseState::Sparse;
    if (any_sparse && !(beta > 0.0 && beta < 1.0)) throw ConfigError("phase plan sparsity must lie in (0, 1)");
}

double PhasePlan::sparse_fraction() const {
    double total = 0.0;
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
        if (boundaries[i].state != PhaseState::Sparse) continue;
        const double end = i + 1 < boundaries.size() ? boundaries[i + 1].progress : 1.0;
        total += end - boundaries[i].progress;
    }
    return total;
}

std::size_t PhasePlan::prune_boundaries() const {
    std::size_t n = 0;
    for (std::size_t i = 1; i < boundaries.size(); ++i) n += boundaries[i].state == PhaseState::Sparse ? 1 : 0;
    return n;
}

std::size_t PhasePlan::growth_boundaries() const {
    std::size_t n = 0;
    for (std::size_t i = 1; i < boundaries.size(); ++i) n += boundaries[i].state == PhaseState::Dense ? 1 : 0;
    return n;
}

nlohmann::json PhasePlan::to_json() const {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& x : boundaries) b.push_back({{"progress", x.progress}, {"state", to_string(x.state)}});
    return {{"scheme", to_string(scheme)}, {"beta", beta}, {"sparse_fraction", sparse_fraction()},
            {"ends_dense", ends_dense()}, {"boundaries", b}};
}

namespace {

void check_fraction(double f) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("sparse_fraction must lie in (0, 1)");
}

}  // namespace

PhasePlan make_plan(Scheme scheme, double beta, double sparse_fraction) {
    PhasePlan plan;
    plan.scheme = scheme;
    plan.beta = beta;
    const double f = sparse_fraction;
    switch (scheme) {
        case Scheme::Baseline:
            plan.boundaries = {{0.0, PhaseState::Dense}};
            break;
        case Scheme::PruningOnly:
            check_fraction(f);
            plan.boundaries = {{0.0, PhaseState::Dense}, {1.0 - f, PhaseState::Sparse}};
            break;
        case Scheme::GrowthOnly:
            check_fraction(f);
            plan.boundaries = {{0.0, PhaseState::Sparse}, {f, PhaseState::Dense}};
            break;
        case Scheme::Dsd:
            check_fraction(f);
            plan.boundaries = {{0.0, PhaseState::Dense},
                               {(1.0 - f) / 2.0, PhaseState::Sparse},
                               {(1.0 + f) / 2.0, PhaseState::Dense}};
            break;
        case Scheme::Alternate: {
            check_fraction(f);
            const double dense = (1.0 - f) / 3.0;
            const double sparse = f / 2.0;
            plan.boundaries = {{0.0, PhaseState::Dense},
                               {dense, PhaseState::Sparse},
                               {dense + sparse, PhaseState::Dense},
                               {2.0 * dense + sparse, PhaseState::Sparse},
                               {2.0 * dense + 2.0 * sparse, PhaseState::Dense}};
            break;
        }
        case Scheme::InitialCapacity:
            throw ConfigError("initial_capacity plans are built with make_initial_capacity_plan");
    }
    plan.validate();
    return plan;
}

PhasePlan make_alternate_plan(double beta, const std::vector<std::pair<double, double>>& sparse_intervals) {
    PhasePlan plan;
    plan.scheme = Scheme::Alternate;
    plan.beta = beta;
    double cursor = 0.0;
    for (const auto& [begin, end] : sparse_intervals) {
        if (!(begin > cursor) || !(end > begin) || end >= 1.0) {
            throw ConfigError("alternate plan: sparse intervals must be ordered, disjoint, and interior");
        }
        if (plan.boundaries.empty()) plan.boundaries.push_back({0.0, PhaseState::Dense});
        plan.boundaries.push_back({begin, PhaseState::Sparse});
        plan.boundaries.push_back({end, PhaseState::Dense});
        cursor = end;
    }
    if (plan.boundaries.empty()) plan.boundaries.push_back({0.0, PhaseState::Dense});
    plan.validate();
    return plan;
}

PhasePlan make_industrial_plan(double beta) { return make_alternate_plan(beta, {{0.20, 0.35}, {0.50, 0.65}}); }

PhasePlan make_initial_capacity_plan(double initial_fraction, double warmup_progress) {
    if (!(initial_fraction > 0.0 && initial_fraction <= 1.0)) {
        throw ConfigError("initial_fraction must lie in (0, 1]");
    }
    if (!(warmup_progress > 0.0 && warmup_progress < 1.0)) throw ConfigError("warmup_progress must lie in (0, 1)");
    PhasePlan plan;
    plan.scheme = Scheme::InitialCapacity;
    if (initial_fraction == 1.0) {
        plan.boundaries = {{0.0, PhaseState::Dense}};
        return plan;
    }
    plan.beta = 1.0 - initial_fraction;
    plan.boundaries = {{0.0, PhaseState::Sparse}, {warmup_progress, PhaseState::Dense}};
    plan.validate();
    return plan;
}

std::uint64_t boundary_sample(double progress, std::uint64_t total_samples) {
    return static_cast<std::uint64_t>(std::llround(progress * static_cast<double>(total_samples)));
}

PhaseTracker::PhaseTracker(PhasePlan plan, std::uint64_t total_samples)
    : plan_(std::move(plan)), total_(total_samples), state_(plan_.initial_state()) {
    plan_.validate();
}

std::vector<PhaseAction> PhaseTracker::advance(std::uint64_t samples_seen) {
    if (samples_seen < last_seen_) throw Error("phase tracker: samples_seen went backwards");
    last_seen_ = samples_seen;
    std::vector<PhaseAction> out;
    while (next_ < plan_.boundaries.size() && samples_seen >= boundary_sample(plan_.boundaries[next_].progress, total_)) {
        const PhaseState target = plan_.boundaries[next_].state;
        out.push_back(target == PhaseState::Sparse ? PhaseAction::TriggerPrune : PhaseAction::TriggerGrowth);
        state_ = target;
        ++next_;
    }
    return out;
}

std::optional<std::uint64_t> PhaseTracker::next_prune_sample() const {
    for (std::size_t i = next_; i < plan_.boundaries.size(); ++i) {
        if (plan_.boundaries[i].state == PhaseState::Sparse) return boundary_sample(plan_.boundaries[i].progress, total_);
    }
    return std::nullopt;
}

std::vector<PhaseAction> advance(const PhasePlan& plan, std::uint64_t previous, std::uint64_t now,
                                 std::uint64_t total_samples) {
    std::vector<PhaseAction> out;
    for (std::size_t i = 1; i < plan.boundaries.size(); ++i) {
        const std::uint64_t b = boundary_sample(plan.boundaries[i].progress, total_samples);
        if (previous < b && b <= now) {
            out.push_back(plan.boundaries[i].state == PhaseState::Sparse ? PhaseAction::TriggerPrune
                                                                        : PhaseAction::TriggerGrowth);
        }
    }
    return out;
}

}  // namespace growprune
