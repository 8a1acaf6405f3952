// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "growprune/checkpoint.hpp"
#include "toy.hpp"

namespace growprune {
namespace {

ModelState sample_state() {
    ModelState m = testing::random_model<float>(testing::tiny_dlrm_config(), 12);
    m.step = 1234;
    m.layers[0].mask.set(2, false);
    m.layers[3].mask.set(7, false);
    m.layers[0].weight(1, 1) = -0.0f;
    return m;
}

TEST(Checkpoint, StreamRoundTripIsBitExact) {
    const ModelState m = sample_state();
    std::stringstream buf;
    write_checkpoint(buf, m);
    const ModelState back = read_checkpoint(buf);
    EXPECT_EQ(back, m);
    EXPECT_TRUE(std::signbit(back.layers[0].weight(1, 1)));
}

TEST(Checkpoint, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "growprune_checkpoint_test.ckpt";
    const ModelState m = sample_state();
    save_checkpoint(path, m);
    EXPECT_EQ(load_checkpoint(path), m);
    std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderStartsWithMagicAndVersion) {
    std::stringstream buf;
    write_checkpoint(buf, sample_state());
    const std::string bytes = buf.str();
    EXPECT_EQ(bytes.substr(0, 4), "GPCK");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), kCheckpointVersion);
    EXPECT_EQ(bytes[5], 0);
}

TEST(Checkpoint, CorruptInputIsDataError) {
    std::stringstream buf;
    write_checkpoint(buf, sample_state());
    const std::string bytes = buf.str();

    std::stringstream bad_magic("XXXX" + bytes.substr(4));
    EXPECT_THROW(read_checkpoint(bad_magic), DataError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_checkpoint(truncated), DataError);
    std::stringstream empty;
    EXPECT_THROW(read_checkpoint(empty), DataError);
    EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), DataError);
}

TEST(Checkpoint, DescribeReportsActiveNeuronsAndDensity) {
    const ModelState m = sample_state();
    const auto d = describe_checkpoint(m);
    EXPECT_FALSE(d.at("dense").get<bool>());
    EXPECT_EQ(d.at("layers")[0].at("active").get<std::size_t>(), m.layers[0].outputs() - 1);
    ModelState dense = m;
    for (auto& l : dense.layers) l.mask = RowMask::dense(l.outputs());
    EXPECT_TRUE(describe_checkpoint(dense).at("dense").get<bool>());
}

}  // namespace
}  // namespace growprune
