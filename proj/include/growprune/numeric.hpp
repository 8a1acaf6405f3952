// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices, structured row masks, and the masked affine
// kernels every fully-connected layer is built on.
//
// Batched kernels use a feature-major activation layout: an activation block
// for a batch of B samples with F features is a Matrix with F rows and B
// columns, so the innermost loops run over the batch and vectorize.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "growprune/errors.hpp"

namespace growprune {

template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    /// Resizes without preserving contents; entries are set to zero.
    void reset(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, T(0));
    }
    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    [[nodiscard]] Matrix<U> cast() const {
        Matrix<U> out(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.values()[i] = static_cast<U>(data_[i]);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// Keep/prune flag per output neuron. The active count is maintained
/// alongside the flags so it never has to be recomputed in hot loops.
class RowMask {
public:
    RowMask() = default;
    explicit RowMask(std::size_t n, bool keep = true) : keep_(n, keep ? 1 : 0), active_(keep ? n : 0) {}

    static RowMask dense(std::size_t n) { return RowMask(n, true); }
    static RowMask from_flags(std::span<const std::uint8_t> flags);

    [[nodiscard]] std::size_t size() const noexcept { return keep_.size(); }
    [[nodiscard]] bool keep(std::size_t i) const noexcept { return keep_[i] != 0; }
    [[nodiscard]] std::size_t active_count() const noexcept { return active_; }
    [[nodiscard]] bool all_keep() const noexcept { return active_ == keep_.size(); }
    [[nodiscard]] std::span<const std::uint8_t> flags() const noexcept { return keep_; }

    void set(std::size_t i, bool keep) noexcept {
        const bool was = keep_[i] != 0;
        if (was == keep) return;
        keep_[i] = keep ? 1 : 0;
        if (keep) {
            ++active_;
        } else {
            --active_;
        }
    }

    friend bool operator==(const RowMask&, const RowMask&) = default;

private:
    std::vector<std::uint8_t> keep_;
    std::size_t active_ = 0;
};

inline RowMask RowMask::from_flags(std::span<const std::uint8_t> flags) {
    RowMask m(flags.size(), false);
    for (std::size_t i = 0; i < flags.size(); ++i) m.set(i, flags[i] != 0);
    return m;
}

namespace detail {

inline void check_dims(bool ok, const std::string& layer, const char* what) {
    if (!ok) throw ShapeError(layer + ": " + what);
}

}  // namespace detail

/// Batched forward: Y[o, :] = W[o, :] · X + b[o] for kept rows, exactly zero
/// for pruned rows. X is I x B, Y is resized to O x B.
template <typename T>
void masked_affine_forward_batch(const Matrix<T>& x, const Matrix<T>& w, std::span<const T> b,
                                 const RowMask& mask, Matrix<T>& y, const std::string& layer = "fc") {
    const std::size_t in = w.cols();
    const std::size_t out = w.rows();
    const std::size_t batch = x.cols();
    detail::check_dims(x.rows() == in, layer, "input width does not match weight columns");
    detail::check_dims(b.size() == out, layer, "bias length does not match weight rows");
    detail::check_dims(mask.size() == out, layer, "mask length does not match weight rows");
    if (y.rows() != out || y.cols() != batch) y.reset(out, batch);

    for (std::size_t o = 0; o < out; ++o) {
        T* __restrict yr = y.row(o).data();
        if (!mask.keep(o)) {
            std::fill(yr, yr + batch, T(0));
            continue;
        }
        const T bias = b[o];
        for (std::size_t n = 0; n < batch; ++n) yr[n] = bias;
        const T* wr = w.row(o).data();
        for (std::size_t i = 0; i < in; ++i) {
            const T wi = wr[i];
            const T* __restrict xr = x.row(i).data();
            for (std::size_t n = 0; n < batch; ++n) yr[n] += wi * xr[n];
        }
    }
}

/// Batched backward for the masked affine layer. Gradient rows of pruned
/// neurons are written as exact zeros and those rows do not feed grad_x.
/// grad_x is skipped when null (first layer of a stack).
template <typename T>
void masked_affine_backward_batch(const Matrix<T>& x, const Matrix<T>& w, const RowMask& mask,
                                  const Matrix<T>& grad_out, Matrix<T>* grad_x, Matrix<T>& grad_w,
                                  std::span<T> grad_b, const std::string& layer = "fc") {
    const std::size_t in = w.cols();
    const std::size_t out = w.rows();
    const std::size_t batch = x.cols();
    detail::check_dims(x.rows() == in, layer, "input width does not match weight columns");
    detail::check_dims(mask.size() == out, layer, "mask length does not match weight rows");
    detail::check_dims(grad_out.rows() == out && grad_out.cols() == batch, layer,
                       "output gradient shape mismatch");
    detail::check_dims(grad_b.size() == out, layer, "bias gradient length mismatch");
    if (grad_w.rows() != out || grad_w.cols() != in) grad_w.reset(out, in);
    if (grad_x != nullptr) {
        grad_x->reset(in, batch);
    }

    for (std::size_t o = 0; o < out; ++o) {
        T* gw = grad_w.row(o).data();
        if (!mask.keep(o)) {
            std::fill(gw, gw + in, T(0));
            grad_b[o] = T(0);
            continue;
        }
        const T* __restrict g = grad_out.row(o).data();
        T gb = T(0);
#pragma omp simd reduction(+ : gb)
        for (std::size_t n = 0; n < batch; ++n) gb += g[n];
        grad_b[o] = gb;
        for (std::size_t i = 0; i < in; ++i) {
            const T* __restrict xr = x.row(i).data();
            T acc = T(0);
#pragma omp simd reduction(+ : acc)
            for (std::size_t n = 0; n < batch; ++n) acc += g[n] * xr[n];
            gw[i] = acc;
        }
        if (grad_x != nullptr) {
            const T* wr = w.row(o).data();
            for (std::size_t i = 0; i < in; ++i) {
                const T wi = wr[i];
                T* __restrict gx = grad_x->row(i).data();
                for (std::size_t n = 0; n < batch; ++n) gx[n] += wi * g[n];
            }
        }
    }
}

/// Single-sample forward: output[t] = dot(W[t], x) + b[t] if kept, else 0.
template <typename T>
std::vector<T> masked_affine_forward(std::span<const T> x, const Matrix<T>& w, std::span<const T> b,
                                     const RowMask& mask, const std::string& layer = "fc") {
    Matrix<T> xm(x.size(), 1);
    std::copy(x.begin(), x.end(), xm.data());
    Matrix<T> y;
    masked_affine_forward_batch(xm, w, b, mask, y, layer);
    return {y.data(), y.data() + y.size()};
}

template <typename T>
struct AffineGradients {
    std::vector<T> grad_x;
    Matrix<T> grad_w;
    std::vector<T> grad_b;
};

template <typename T>
AffineGradients<T> masked_affine_backward(std::span<const T> x, const Matrix<T>& w, const RowMask& mask,
                                          std::span<const T> grad_out, const std::string& layer = "fc") {
    detail::check_dims(grad_out.size() == w.rows(), layer, "output gradient length mismatch");
    Matrix<T> xm(x.size(), 1);
    std::copy(x.begin(), x.end(), xm.data());
    Matrix<T> gm(grad_out.size(), 1);
    std::copy(grad_out.begin(), grad_out.end(), gm.data());
    AffineGradients<T> out;
    out.grad_b.assign(w.rows(), T(0));
    Matrix<T> gx;
    masked_affine_backward_batch(xm, w, mask, gm, &gx, out.grad_w, std::span<T>(out.grad_b), layer);
    out.grad_x.assign(gx.data(), gx.data() + gx.size());
    return out;
}

template <typename T>
constexpr T smallest_normal() noexcept {
    return std::numeric_limits<T>::min();
}

/// Replaces every entry with 0 < |v| < threshold by a zero of the same sign
/// (what FTZ hardware produces). Returns the number of entries flushed.
template <typename T>
std::size_t flush_subnormals_inplace(std::span<T> values, T threshold = smallest_normal<float>()) {
    std::size_t flushed = 0;
    for (T& v : values) {
        const T a = std::fabs(v);
        if (a > T(0) && a < threshold) {
            v = std::copysign(T(0), v);
            ++flushed;
        }
    }
    return flushed;
}

template <typename T>
std::vector<T> flush_subnormals(std::span<const T> values, T threshold = smallest_normal<float>()) {
    std::vector<T> out(values.begin(), values.end());
    flush_subnormals_inplace(std::span<T>(out), threshold);
    return out;
}

/// Sets the FTZ/DAZ bits of the calling thread's SSE control register for the
/// guard's lifetime. A no-op on targets without SSE.
class DenormalGuard {
public:
    explicit DenormalGuard(bool enable);
    ~DenormalGuard();
    DenormalGuard(const DenormalGuard&) = delete;
    DenormalGuard& operator=(const DenormalGuard&) = delete;

private:
    unsigned saved_ = 0;
    bool active_ = false;
};

}  // namespace growprune
