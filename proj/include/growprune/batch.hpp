// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace growprune {

/// A batch of samples in sample-major layout.
struct MiniBatch {
    std::size_t num_continuous = 0;
    std::size_t num_categorical = 0;
    std::vector<float> labels;               // {0, 1}
    std::vector<float> continuous;           // size() x num_continuous
    std::vector<std::uint32_t> categorical;  // size() x num_categorical

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] bool empty() const noexcept { return labels.empty(); }

    std::span<const float> continuous_row(std::size_t i) const {
        return {continuous.data() + i * num_continuous, num_continuous};
    }
    std::span<const std::uint32_t> categorical_row(std::size_t i) const {
        return {categorical.data() + i * num_categorical, num_categorical};
    }

    void reserve(std::size_t n) {
        labels.reserve(n);
        continuous.reserve(n * num_continuous);
        categorical.reserve(n * num_categorical);
    }

    void push(float label, std::span<const float> cont, std::span<const std::uint32_t> cat) {
        labels.push_back(label);
        continuous.insert(continuous.end(), cont.begin(), cont.end());
        categorical.insert(categorical.end(), cat.begin(), cat.end());
    }

    /// Copies samples [begin, end) into a new batch.
    [[nodiscard]] MiniBatch slice(std::size_t begin, std::size_t end) const {
        MiniBatch out;
        out.num_continuous = num_continuous;
        out.num_categorical = num_categorical;
        out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                          labels.begin() + static_cast<std::ptrdiff_t>(end));
        out.continuous.assign(continuous.begin() + static_cast<std::ptrdiff_t>(begin * num_continuous),
                              continuous.begin() + static_cast<std::ptrdiff_t>(end * num_continuous));
        out.categorical.assign(categorical.begin() + static_cast<std::ptrdiff_t>(begin * num_categorical),
                               categorical.begin() + static_cast<std::ptrdiff_t>(end * num_categorical));
        return out;
    }

    friend bool operator==(const MiniBatch&, const MiniBatch&) = default;
};

}  // namespace growprune
