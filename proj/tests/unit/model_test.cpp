// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "growprune/model.hpp"
#include "toy.hpp"

namespace growprune {
namespace {

using testing::random_batch;
using testing::random_model;
using testing::toy_config;

TEST(ModelConfig, DefaultTopInputWidth) {
    const ModelConfig c;
    EXPECT_EQ(c.interaction_pairs(), 27u * 26u / 2u);
    EXPECT_EQ(c.top_input_width(), 355u);
    const auto shapes = c.fc_shapes();
    ASSERT_EQ(shapes.size(), 7u);
    EXPECT_EQ(shapes[0].name, "bottom.0");
    EXPECT_EQ(shapes[0].inputs, 13u);
    EXPECT_EQ(shapes[4].name, "top.0");
    EXPECT_EQ(shapes[4].inputs, 355u);
    EXPECT_EQ(shapes[6].outputs, 1u);
}

TEST(ModelConfig, RejectsInconsistentShapes) {
    ModelConfig c = toy_config();
    c.bottom_dims = {4, 3};
    EXPECT_THROW(c.validate(), ConfigError);
    c = toy_config();
    c.top_dims = {4, 2};
    EXPECT_THROW(c.validate(), ConfigError);
    c = toy_config();
    c.table_sizes.pop_back();
    EXPECT_THROW(c.validate(), ConfigError);
    c = toy_config();
    c.table_sizes[0] = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfig, JsonRoundTripAndScalarTableSize) {
    const ModelConfig c = toy_config(7);
    nlohmann::json j = c;
    EXPECT_EQ(j.get<ModelConfig>(), c);
    j["table_size"] = 11;
    EXPECT_EQ(j.get<ModelConfig>().table_sizes, std::vector<std::size_t>(3, 11));
}

TEST(ModelState, InitIsSeededAndBounded) {
    const ModelConfig c = toy_config(50);
    const ModelState a = ModelState::init(c, 3);
    EXPECT_EQ(a, ModelState::init(c, 3));
    EXPECT_NE(a, ModelState::init(c, 4));
    EXPECT_TRUE(a.dense());
    for (const auto& t : a.embeddings) {
        for (float v : t.values()) EXPECT_LE(std::fabs(v), std::sqrt(1.0f / 50.0f));
    }
    for (const auto& l : a.layers) {
        const float bound = std::sqrt(1.0f / static_cast<float>(l.inputs()));
        for (float v : l.weight.values()) EXPECT_LE(std::fabs(v), bound);
    }
}

TEST(Forward, ZeroModelPredictsHalf) {
    const ModelConfig c = toy_config();
    const ModelState m = ModelState::zeros(c);
    for (float p : predict(m, random_batch(c, 16, 1))) EXPECT_EQ(p, 0.5f);
}

// One continuous and one categorical feature, embedding dim 1, bottom [1],
// top [1]. Top input is [bottom_out, emb * bottom_out].
TEST(Forward, HandComputedSingleSample) {
    ModelConfig c;
    c.num_continuous = 1;
    c.num_categorical = 1;
    c.embedding_dim = 1;
    c.table_sizes = {2};
    c.bottom_dims = {1};
    c.top_dims = {1};
    BasicModelState<double> m = BasicModelState<double>::zeros(c);
    m.layers[0].weight(0, 0) = 0.5;
    m.layers[0].bias[0] = 0.25;
    m.embeddings[0](1, 0) = -0.4;
    m.layers[1].weight(0, 0) = 0.8;
    m.layers[1].weight(0, 1) = 2.0;
    m.layers[1].bias[0] = -0.1;

    MiniBatch b;
    b.num_continuous = 1;
    b.num_categorical = 1;
    const float x[] = {2.0f};
    const std::uint32_t cat[] = {1};
    b.push(1.0f, x, cat);
    // bottom = relu(0.5 * 2 + 0.25) = 1.25; pair = -0.4 * 1.25 = -0.5;
    // logit = 0.8 * 1.25 + 2 * -0.5 - 0.1 = -0.1.
    const auto p = predict(m, b);
    EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(0.1)), 1e-15);
    EXPECT_NEAR(p[0], 0.47502081252105999, 1e-15);
}

TEST(Forward, MaskedModelEqualsHardZeroedDense) {
    const ModelConfig c = testing::tiny_dlrm_config();
    ModelState masked = random_model<float>(c, 5);
    masked.layers[0].mask.set(3, false);
    masked.layers[3].mask.set(0, false);
    masked.layers[3].mask.set(6, false);
    ModelState zeroed = masked;
    for (auto& l : zeroed.layers) {
        for (std::size_t o = 0; o < l.outputs(); ++o) {
            if (l.mask.keep(o)) continue;
            for (float& v : l.weight.row(o)) v = 0.0f;
            l.bias[o] = 0.0f;
            l.mask.set(o, true);
        }
    }
    const MiniBatch b = random_batch(c, 32, 2);
    EXPECT_EQ(predict(masked, b), predict(zeroed, b));
}

TEST(Forward, OutOfRangeCategoryIsDataError) {
    const ModelConfig c = toy_config();
    const ModelState m = ModelState::zeros(c);
    MiniBatch b = random_batch(c, 2, 1);
    b.categorical[1] = 5;
    EXPECT_THROW(predict(m, b), DataError);
}

TEST(Backward, MatchesFiniteDifferences) {
    const ModelConfig c = toy_config();
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto m = random_model<double>(c, seed);
        const auto r = testing::check_gradients(m, random_batch(c, 8, seed + 100));
        EXPECT_EQ(r.failures, 0u) << "worst " << r.worst_parameter << " rel " << r.worst_relative;
        EXPECT_GT(r.checked, 0u);
    }
}

TEST(Backward, MaskedRowsGetZeroGradient) {
    const ModelConfig c = testing::tiny_dlrm_config();
    ModelState m = random_model<float>(c, 8);
    m.layers[1].mask.set(0, false);
    m.layers[2].mask.set(5, false);
    BatchActivations<float> cache;
    const MiniBatch b = random_batch(c, 16, 3);
    forward(m, b, cache);
    const auto g = backward(m, cache, std::span<const float>(b.labels));
    for (float v : g.weight[1].row(0)) EXPECT_EQ(v, 0.0f);
    for (float v : g.weight[2].row(5)) EXPECT_EQ(v, 0.0f);
    EXPECT_EQ(g.bias[1][0], 0.0f);
    EXPECT_EQ(g.bias[2][5], 0.0f);
}

TEST(Backward, VanishesAtPerfectPrediction) {
    const ModelConfig c = toy_config();
    BasicModelState<double> m = random_model<double>(c, 4);
    m.layers.back().bias[0] = 60.0;  // sigmoid saturates to 1
    MiniBatch b = random_batch(c, 4, 9);
    for (float& y : b.labels) y = 1.0f;
    BatchActivations<double> cache;
    forward(m, b, cache);
    const auto g = backward(m, cache, std::span<const float>(b.labels));
    double norm = 0;
    for (const auto& w : g.weight) {
        for (double v : w.values()) norm += v * v;
    }
    EXPECT_LT(std::sqrt(norm), 1e-20);
}

TEST(Backward, UnreferencedEmbeddingRowsAreAbsent) {
    const ModelConfig c = toy_config(50);
    const ModelState m = random_model<float>(c, 1);
    MiniBatch b = random_batch(c, 3, 4);
    for (std::size_t s = 0; s < 3; ++s) b.categorical[s * 3] = static_cast<std::uint32_t>(7 + (s % 2));
    BatchActivations<float> cache;
    forward(m, b, cache);
    const auto g = backward(m, cache, std::span<const float>(b.labels));
    EXPECT_EQ(g.embedding[0].rows, (std::vector<std::uint32_t>{7, 8}));
    EXPECT_EQ(g.embedding[0].values.rows(), 2u);
}

TEST(Backward, ReluSubgradientAtZeroIsOne) {
    // A bottom neuron with zero weights and bias sits exactly at the kink and
    // must still receive gradient.
    const ModelConfig c = toy_config();
    BasicModelState<double> m = random_model<double>(c, 2);
    for (double& v : m.layers[0].weight.row(1)) v = 0.0;
    m.layers[0].bias[1] = 0.0;
    const MiniBatch b = random_batch(c, 8, 5);
    BatchActivations<double> cache;
    forward(m, b, cache);
    const auto g = backward(m, cache, std::span<const float>(b.labels));
    double norm = std::fabs(g.bias[0][1]);
    for (double v : g.weight[0].row(1)) norm += std::fabs(v);
    EXPECT_GT(norm, 0.0);
}

TEST(BceLoss, ClosedForms) {
    const std::vector<float> half{0.5f, 0.5f, 0.5f}, y3{1, 0, 1};
    EXPECT_NEAR(bce_loss<float>(half, y3), std::log(2.0), 1e-7);
    const std::vector<double> exact{1.0, 0.0};
    const std::vector<float> yf{1, 0};
    EXPECT_LE(bce_loss<double>(exact, yf), -std::log(1.0 - kPredictionEpsilon) + 1e-15);
    const std::vector<double> p{0.9, 0.1};
    EXPECT_NEAR(bce_loss<double>(p, yf), -std::log(0.9), 1e-12);
    EXPECT_NEAR(bce_loss<double>(p, yf), 0.105361, 1e-6);
    EXPECT_THROW(bce_loss<double>(p, std::vector<float>{1}), ShapeError);
}

TEST(ModelState, CastRoundTrip) {
    const ModelState m = ModelState::init(toy_config(), 9);
    EXPECT_EQ(m.cast<double>().cast<float>(), m);
}

}  // namespace
}  // namespace growprune
