// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace resprobe {

/// Dense row-major f32 array. Every dimension is positive and
/// `size() == product(shape())` always holds.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<float> data);

    /// 1-D tensor holding `values`.
    static Tensor vector(std::vector<float> values);
    /// 2-D tensor from nested rows; all rows must have the same length.
    static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    /// Extent of the innermost axis.
    std::size_t last_dim() const { return shape_.empty() ? 0 : shape_.back(); }
    /// Product of all but the innermost axis.
    std::size_t rows() const { return last_dim() == 0 ? 0 : size() / last_dim(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    std::vector<float>& storage() noexcept { return data_; }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }
    float& at(std::size_t r, std::size_t c);
    float at(std::size_t r, std::size_t c) const;

    std::span<float> row(std::size_t r);
    std::span<const float> row(std::size_t r) const;

    bool all_finite() const noexcept;
    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

std::string shape_string(std::span<const std::size_t> shape);
std::size_t shape_product(std::span<const std::size_t> shape);

/// Norm epsilon shared by both normalization families.
inline constexpr float kNormEps = 1e-5f;

// Raw kernels. All use a fixed accumulation order (row by row, inner index
// ascending), so a given output row does not depend on how many other rows
// are computed in the same call.

/// out[m x n] = a[m x k] * b[k x n]
void gemm(std::span<const float> a, std::span<const float> b, std::span<float> out,
          std::size_t m, std::size_t k, std::size_t n);
void layer_norm_rows(std::span<const float> x, std::span<float> out, std::size_t dim);
void rms_norm_rows(std::span<const float> x, std::span<const float> gain, std::span<float> out,
                   std::size_t dim);
void softmax_inplace(std::span<float> x);
float dot(std::span<const float> a, std::span<const float> b);
float l2_norm(std::span<const float> a);

// Tensor operations.

Tensor matmul(const Tensor& a, const Tensor& b);
/// (x - mean) / sqrt(var + eps) over the last axis, no learned parameters.
Tensor layer_norm_nonparametric(const Tensor& x);
/// x / sqrt(mean(x^2) + eps) * gain over the last axis.
Tensor rms_norm(const Tensor& x, const Tensor& gain);
Tensor softmax(const Tensor& x);
float l2_distance(const Tensor& a, const Tensor& b);
float l2_distance(std::span<const float> a, std::span<const float> b);

/// Projection parameter t such that a + t(b - a) is the foot of c on line(a, b).
double projection_coefficient(std::span<const float> c, std::span<const float> a,
                             std::span<const float> b);
/// Orthogonal projection of `c` onto the line through `a` and `b`.
/// Throws DegenerateLineError when |b - a| < 1e-8.
Tensor orthogonal_project(const Tensor& c, const Tensor& a, const Tensor& b);

}  // namespace resprobe
