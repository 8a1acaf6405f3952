// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "growprune/errors.hpp"
#include "growprune/scheduler.hpp"

namespace growprune {
namespace {

using A = PhaseAction;

std::vector<double> phase_lengths(const PhasePlan& p) {
    std::vector<double> out;
    for (std::size_t i = 0; i < p.boundaries.size(); ++i) {
        const double end = i + 1 < p.boundaries.size() ? p.boundaries[i + 1].progress : 1.0;
        out.push_back(end - p.boundaries[i].progress);
    }
    return out;
}

// Walks the stream in batches and records (samples_seen, action) pairs.
std::vector<std::pair<std::uint64_t, A>> walk(const PhasePlan& plan, std::uint64_t total, std::uint64_t batch) {
    PhaseTracker t(plan, total);
    std::vector<std::pair<std::uint64_t, A>> out;
    for (std::uint64_t seen = batch; seen < total + batch; seen += batch) {
        const std::uint64_t s = std::min(seen, total);
        for (A a : t.advance(s)) out.emplace_back(s, a);
    }
    return out;
}

TEST(MakePlan, AlternateHasFiveEqualPhases) {
    const PhasePlan p = make_plan(Scheme::Alternate, 0.7, 0.4);
    ASSERT_EQ(p.boundaries.size(), 5u);
    for (double len : phase_lengths(p)) EXPECT_NEAR(len, 0.2, 1e-12);
    EXPECT_EQ(p.initial_state(), PhaseState::Dense);
    EXPECT_TRUE(p.ends_dense());
    EXPECT_NEAR(p.sparse_fraction(), 0.4, 1e-12);
    EXPECT_EQ(p.prune_boundaries(), 2u);
    EXPECT_EQ(p.growth_boundaries(), 2u);
}

TEST(MakePlan, DsdIsDenseSparseDense) {
    const PhasePlan p = make_plan(Scheme::Dsd, 0.7, 0.4);
    const auto len = phase_lengths(p);
    ASSERT_EQ(len.size(), 3u);
    EXPECT_NEAR(len[0], 0.3, 1e-12);
    EXPECT_NEAR(len[1], 0.4, 1e-12);
    EXPECT_NEAR(len[2], 0.3, 1e-12);
    EXPECT_EQ(p.boundaries[1].state, PhaseState::Sparse);
}

TEST(MakePlan, BaselinePruningOnlyGrowthOnly) {
    const PhasePlan b = make_plan(Scheme::Baseline, 0.0, 0.4);
    EXPECT_EQ(b.boundaries, (std::vector<Boundary>{{0.0, PhaseState::Dense}}));
    EXPECT_EQ(b.sparse_fraction(), 0.0);

    const PhasePlan p = make_plan(Scheme::PruningOnly, 0.7, 0.4);
    EXPECT_NEAR(p.boundaries[1].progress, 0.6, 1e-12);
    EXPECT_FALSE(p.ends_dense());
    EXPECT_FALSE(p.dense_compliant());

    const PhasePlan g = make_plan(Scheme::GrowthOnly, 0.7, 0.4);
    EXPECT_EQ(g.initial_state(), PhaseState::Sparse);
    EXPECT_NEAR(g.boundaries[1].progress, 0.4, 1e-12);
    EXPECT_TRUE(g.ends_dense());
}

TEST(MakePlan, EveryComparisonSchemeIsSparseForTheSameFraction) {
    for (Scheme s : {Scheme::PruningOnly, Scheme::GrowthOnly, Scheme::Dsd, Scheme::Alternate}) {
        EXPECT_NEAR(make_plan(s, 0.7, 0.4).sparse_fraction(), 0.4, 1e-12) << to_string(s);
    }
}

TEST(MakePlan, RejectsInvalidArguments) {
    EXPECT_THROW(make_plan(Scheme::Alternate, 0.0, 0.4), ConfigError);
    EXPECT_THROW(make_plan(Scheme::Alternate, 1.0, 0.4), ConfigError);
    EXPECT_THROW(make_plan(Scheme::Dsd, 0.5, 1.0), ConfigError);
    EXPECT_THROW(make_plan(Scheme::InitialCapacity, 0.5, 0.4), ConfigError);
    EXPECT_THROW(parse_scheme("magic"), ConfigError);
    EXPECT_EQ(parse_scheme("pruning_only"), Scheme::PruningOnly);
}

TEST(MakePlan, ExplicitIntervals) {
    const PhasePlan p = make_industrial_plan(0.3);
    ASSERT_EQ(p.boundaries.size(), 5u);
    EXPECT_EQ(p.boundaries[1].progress, 0.20);
    EXPECT_EQ(p.boundaries[4].progress, 0.65);
    EXPECT_NEAR(p.sparse_fraction(), 0.3, 1e-12);
    EXPECT_THROW(make_alternate_plan(0.5, {{0.3, 0.2}}), ConfigError);
    EXPECT_THROW(make_alternate_plan(0.5, {{0.1, 0.3}, {0.25, 0.4}}), ConfigError);
    EXPECT_THROW(make_alternate_plan(0.5, {{0.5, 1.0}}), ConfigError);
}

TEST(PhasePlan, ValidateRejectsMalformedPlans) {
    PhasePlan p;
    p.beta = 0.5;
    EXPECT_THROW(p.validate(), ConfigError);
    p.boundaries = {{0.1, PhaseState::Dense}};
    EXPECT_THROW(p.validate(), ConfigError);
    p.boundaries = {{0.0, PhaseState::Dense}, {0.5, PhaseState::Dense}};
    EXPECT_THROW(p.validate(), ConfigError);
    p.boundaries = {{0.0, PhaseState::Dense}, {0.5, PhaseState::Sparse}, {0.4, PhaseState::Dense}};
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Advance, BaselineNeverTriggers) {
    EXPECT_TRUE(walk(make_plan(Scheme::Baseline, 0, 0.4), 1000, 7).empty());
}

TEST(Advance, AlternateEnumeration) {
    const auto events = walk(make_plan(Scheme::Alternate, 0.7, 0.4), 1000, 10);
    const std::vector<std::pair<std::uint64_t, A>> expected{
        {200, A::TriggerPrune}, {400, A::TriggerGrowth}, {600, A::TriggerPrune}, {800, A::TriggerGrowth}};
    EXPECT_EQ(events, expected);
}

TEST(Advance, FiresAtFirstBatchReachingBoundary) {
    const auto events = walk(make_plan(Scheme::Alternate, 0.7, 0.4), 1000, 30);
    ASSERT_EQ(events.size(), 4u);
    EXPECT_EQ(events[0].first, 210u);
    EXPECT_EQ(events[1].first, 420u);
    EXPECT_EQ(events[2].first, 600u);
    EXPECT_EQ(events[3].first, 810u);
}

TEST(Advance, SeveralBoundariesInOneBatchFireInOrder) {
    PhaseTracker t(make_plan(Scheme::Alternate, 0.7, 0.4), 10);
    EXPECT_EQ(t.advance(5), (std::vector<A>{A::TriggerPrune, A::TriggerGrowth}));
    EXPECT_EQ(t.state(), PhaseState::Dense);
    EXPECT_EQ(t.advance(10), (std::vector<A>{A::TriggerPrune, A::TriggerGrowth}));
    EXPECT_TRUE(t.advance(10).empty());
    EXPECT_THROW(t.advance(3), Error);
}

TEST(Advance, StatelessFormAgreesWithTracker) {
    const PhasePlan plan = make_plan(Scheme::Dsd, 0.5, 0.4);
    PhaseTracker t(plan, 977);
    std::uint64_t prev = 0;
    for (std::uint64_t now = 13; prev < 977; now += 13) {
        const std::uint64_t n = std::min<std::uint64_t>(now, 977);
        EXPECT_EQ(advance(plan, prev, n, 977), t.advance(n));
        prev = n;
    }
}

TEST(Advance, NextPruneSample) {
    PhaseTracker t(make_plan(Scheme::Alternate, 0.7, 0.4), 1000);
    EXPECT_EQ(t.next_prune_sample(), 200u);
    t.advance(200);
    EXPECT_EQ(t.next_prune_sample(), 600u);
    t.advance(600);
    EXPECT_FALSE(t.next_prune_sample().has_value());
}

TEST(InitialCapacity, PlanShape) {
    const PhasePlan full = make_initial_capacity_plan(1.0);
    EXPECT_EQ(full.boundaries.size(), 1u);
    EXPECT_EQ(full.initial_state(), PhaseState::Dense);

    const PhasePlan half = make_initial_capacity_plan(0.5);
    EXPECT_EQ(half.beta, 0.5);
    EXPECT_EQ(half.initial_state(), PhaseState::Sparse);
    EXPECT_EQ(half.boundaries[1].progress, 0.1);
    EXPECT_NEAR(half.sparse_fraction(), 0.1, 1e-12);
    EXPECT_TRUE(half.ends_dense());
    EXPECT_EQ(walk(half, 1000, 50), (std::vector<std::pair<std::uint64_t, A>>{{100, A::TriggerGrowth}}));

    EXPECT_THROW(make_initial_capacity_plan(0.0), ConfigError);
    EXPECT_THROW(make_initial_capacity_plan(0.5, 1.0), ConfigError);
}

TEST(PhasePlan, JsonDescribesBoundaries) {
    const auto j = make_plan(Scheme::Alternate, 0.7, 0.4).to_json();
    EXPECT_EQ(j.at("scheme"), "alternate");
    EXPECT_EQ(j.at("boundaries").size(), 5u);
    EXPECT_EQ(j.at("boundaries")[1].at("state"), "sparse");
    EXPECT_TRUE(j.at("ends_dense").get<bool>());
}

}  // namespace
}  // namespace growprune
