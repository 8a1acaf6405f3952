// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "growprune/data.hpp"
#include "growprune/metrics.hpp"
#include "growprune/optimizer.hpp"

namespace growprune {
namespace {

std::string criteo_row(const std::string& label, const std::string& first_int, const std::string& first_cat) {
    std::string row = label + "\t" + first_int;
    for (int i = 1; i < 13; ++i) row += "\t";
    row += "\t" + first_cat;
    for (int i = 1; i < 26; ++i) row += "\t";
    return row;
}

const std::vector<std::size_t> kTables(26, 1000);

TEST(CategoricalHash, Fnv1aVectors) {
    EXPECT_EQ(categorical_hash(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(categorical_hash("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(categorical_hash("foobar"), 0x85944171f73967e8ULL);
}

TEST(ParseCriteo, TransformsFirstFields) {
    float label = -1;
    std::vector<float> x(13);
    std::vector<std::uint32_t> c(26);
    ASSERT_TRUE(parse_criteo_line(criteo_row("1", "5", "68fd1e64"), kTables, label, x, c));
    EXPECT_EQ(label, 1.0f);
    EXPECT_NEAR(x[0], std::log(6.0), 1e-6);
    EXPECT_NEAR(x[0], 1.79176, 1e-5);
    EXPECT_EQ(c[0], categorical_hash("68fd1e64") % 1000);
    for (std::size_t i = 1; i < 13; ++i) EXPECT_EQ(x[i], 0.0f);
    for (std::size_t i = 1; i < 26; ++i) EXPECT_EQ(c[i], 0u);
}

TEST(ParseCriteo, MissingFieldsAndNegativeCounts) {
    float label = -1;
    std::vector<float> x(13, 9.0f);
    std::vector<std::uint32_t> c(26, 9);
    ASSERT_TRUE(parse_criteo_line(criteo_row("0", "", ""), kTables, label, x, c));
    EXPECT_EQ(label, 0.0f);
    for (float v : x) EXPECT_EQ(v, 0.0f);
    for (auto v : c) EXPECT_EQ(v, 0u);
    ASSERT_TRUE(parse_criteo_line(criteo_row("0", "-3", ""), kTables, label, x, c));
    EXPECT_EQ(x[0], 0.0f);
}

TEST(ParseCriteo, RejectsMalformedRows) {
    float label;
    std::vector<float> x(13);
    std::vector<std::uint32_t> c(26);
    EXPECT_FALSE(parse_criteo_line("1\t2\t3", kTables, label, x, c));
    EXPECT_FALSE(parse_criteo_line(criteo_row("2", "5", "aa"), kTables, label, x, c));
    EXPECT_FALSE(parse_criteo_line(criteo_row("1", "5x", "aa"), kTables, label, x, c));
    EXPECT_FALSE(parse_criteo_line(criteo_row("1", "5", "zz!"), kTables, label, x, c));
    EXPECT_FALSE(parse_criteo_line(criteo_row("1", "5", "aa") + "\textra", kTables, label, x, c));
}

class CriteoFile : public ::testing::Test {
protected:
    void SetUp() override {
        path_ = std::filesystem::temp_directory_path() / "growprune_criteo_test.tsv";
        std::ofstream out(path_);
        for (int i = 0; i < 10; ++i) {
            out << criteo_row(i % 3 == 0 ? "1" : "0", std::to_string(i), "a" + std::to_string(i)) << '\n';
            if (i == 4) out << "garbage row\n";
        }
    }
    void TearDown() override { std::filesystem::remove(path_); }
    std::filesystem::path path_;
};

TEST_F(CriteoFile, StreamsBatchesAndSkipsBadRows) {
    EXPECT_EQ(count_lines(path_), 11u);
    CriteoReader reader(path_, kTables, 4);
    std::vector<MiniBatch> batches;
    while (auto b = reader.next()) batches.push_back(std::move(*b));
    ASSERT_EQ(batches.size(), 3u);
    EXPECT_EQ(batches[0].size(), 4u);
    EXPECT_EQ(batches[2].size(), 2u);
    EXPECT_EQ(reader.skipped(), 1u);
    EXPECT_EQ(reader.delivered(), 10u);
    EXPECT_EQ(batches[0].labels[0], 1.0f);
    EXPECT_NEAR(batches[0].continuous[13], std::log(2.0), 1e-6);

    CriteoReader again(path_, kTables, 4);
    for (const auto& b : batches) EXPECT_EQ(*again.next(), b);
}

TEST_F(CriteoFile, RowRange) {
    CriteoReader reader(path_, kTables, 100, 6, 9);
    const auto b = reader.next();
    ASSERT_TRUE(b.has_value());
    // Lines 6..8 are data rows 5..7 (line 5 is the garbage row).
    EXPECT_EQ(b->size(), 3u);
    EXPECT_NEAR(b->continuous[0], std::log(6.0), 1e-6);
    EXPECT_FALSE(reader.next().has_value());
}

TEST(CriteoReaderErrors, MissingFileAndBadArguments) {
    EXPECT_THROW(CriteoReader("/nonexistent/file.tsv", kTables, 4), DataError);
    EXPECT_THROW(count_lines("/nonexistent/file.tsv"), DataError);
}

DriftSpec two_segments(bool orthogonal) {
    DriftSpec s;
    s.seed = 17;
    DriftSegment a, b;
    a.end = 0.5;
    b.begin = 0.5;
    b.orthogonal_to_previous = orthogonal;
    b.scale = 3.0;
    a.scale = 3.0;
    s.segments = {a, b};
    return s;
}

StreamShape small_shape() { return StreamShape{4, std::vector<std::size_t>(3, 50)}; }

TEST(DriftSpec, Validation) {
    DriftSpec s = two_segments(false);
    EXPECT_NO_THROW(s.validate());
    s.segments[1].begin = 0.6;
    EXPECT_THROW(s.validate(), ConfigError);
    s = two_segments(false);
    s.segments[1].end = 0.9;
    EXPECT_THROW(s.validate(), ConfigError);
    s.segments.clear();
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_EQ(two_segments(false).segment_at(0.49), 0u);
    EXPECT_EQ(two_segments(false).segment_at(0.5), 1u);
    EXPECT_EQ(two_segments(false).segment_at(1.0), 1u);
}

TEST(DriftSpec, JsonRoundTrip) {
    DriftSpec s = two_segments(true);
    s.feature_map.hidden_units = 3;
    nlohmann::json j = s;
    const DriftSpec back = j.get<DriftSpec>();
    EXPECT_EQ(nlohmann::json(back), j);
}

TEST(SyntheticStream, SameSeedSameStream) {
    auto p = std::make_shared<SyntheticProcess>(two_segments(true), small_shape());
    SyntheticStream a(p, 300, 64), b(p, 300, 64);
    std::size_t total = 0;
    while (auto x = a.next()) {
        const auto y = b.next();
        ASSERT_TRUE(y.has_value());
        EXPECT_EQ(*x, *y);
        total += x->size();
    }
    EXPECT_FALSE(b.next().has_value());
    EXPECT_EQ(total, 300u);
}

TEST(SyntheticStream, TestStreamDiffersFromTrain) {
    auto p = std::make_shared<SyntheticProcess>(two_segments(true), small_shape());
    SyntheticStream a(p, 100, 100), t(p, 100, 100, SyntheticStream::Part::Test);
    EXPECT_NE(a.next()->continuous, t.next()->continuous);
}

TEST(SyntheticStream, ZeroWeightsGiveHalfBaseRate) {
    DriftSpec s;
    s.segments[0].bias = 0.0;
    s.segments[0].weights.assign(SyntheticProcess(s, small_shape()).feature_dim(), 0.0);
    auto p = std::make_shared<SyntheticProcess>(s, small_shape());
    SyntheticStream stream(p, 20000, 1000);
    double pos = 0;
    while (auto b = stream.next()) {
        for (float y : b->labels) pos += y;
    }
    // 5 standard deviations of a Binomial(20000, 0.5) proportion.
    EXPECT_NEAR(pos / 20000.0, 0.5, 5 * 0.5 / std::sqrt(20000.0));
}

TEST(SyntheticProcess, OrthogonalSegmentsAndScale) {
    const SyntheticProcess p(two_segments(true), small_shape());
    const auto a = p.weights(0), b = p.weights(1);
    const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    EXPECT_NEAR(dot, 0.0, 1e-9);
    const double norm = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
    EXPECT_NEAR(norm, 3.0, 1e-9);
}

TEST(SyntheticProcess, CategoriesInRangeAndSkewed) {
    DriftSpec s;
    s.segments[0].active_categories = 20;
    s.segments[0].zipf_exponent = 1.2;
    const SyntheticProcess p(s, small_shape());
    Rng rng(3);
    std::vector<std::size_t> counts(50, 0);
    std::vector<float> x(4);
    std::vector<std::uint32_t> c(3);
    float y;
    for (int i = 0; i < 5000; ++i) {
        p.draw(0, rng, y, x, c);
        for (auto v : c) ASSERT_LT(v, 50u);
        ++counts[c[0]];
    }
    std::size_t used = 0;
    for (auto n : counts) used += n > 0;
    EXPECT_LE(used, 20u);
    EXPECT_GT(*std::max_element(counts.begin(), counts.end()), 5000u / 20u);
}

// A logistic model fit on segment 1 only sees its window CE jump once the
// stream crosses into an orthogonal segment 2.
TEST(SyntheticStream, OrthogonalDriftRaisesWindowCe) {
    const ModelConfig cfg = [] {
        ModelConfig c;
        c.num_continuous = 4;
        c.num_categorical = 3;
        c.embedding_dim = 2;
        c.table_sizes.assign(3, 50);
        c.bottom_dims = {8, 2};
        c.top_dims = {8, 1};
        return c;
    }();
    DriftSpec spec = two_segments(true);
    spec.segments[0].bias = 0.0;
    spec.segments[1].bias = 0.0;
    auto p = std::make_shared<SyntheticProcess>(spec, small_shape());
    SyntheticStream stream(p, 40000, 20);
    ModelState m = ModelState::init(cfg, 1);
    OptimizerConfig oc;
    oc.learning_rate = 0.1;
    Optimizer<float> opt(oc, m);
    std::vector<MiniBatch> before, after;
    std::uint64_t seen = 0;
    while (auto b = stream.next()) {
        if (seen >= 16000 && seen < 20000) before.push_back(*b);
        if (seen >= 20000 && seen < 24000) after.push_back(*b);
        if (seen < 20000) {
            BatchActivations<float> cache;
            forward(m, *b, cache);
            opt.apply(m, backward(m, cache, std::span<const float>(b->labels)));
        }
        seen += b->size();
    }
    const double ce_before = evaluate(m, std::span<const MiniBatch>(before)).ce;
    const double ce_after = evaluate(m, std::span<const MiniBatch>(after)).ce;
    EXPECT_GT(ce_after, ce_before);
}

}  // namespace
}  // namespace growprune
