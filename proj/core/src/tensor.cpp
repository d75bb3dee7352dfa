// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "resprobe/error.hpp"

namespace resprobe {

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive: " + resprobe::shape_string(shape_));
    }
    data_.assign(shape_product(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive: " + resprobe::shape_string(shape_));
    }
    if (data_.size() != shape_product(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + resprobe::shape_string(shape_));
    }
}

Tensor Tensor::vector(std::vector<float> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<float> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

float& Tensor::at(std::size_t r, std::size_t c) {
    return data_.at(r * last_dim() + c);
}

float Tensor::at(std::size_t r, std::size_t c) const {
    return data_.at(r * last_dim() + c);
}

std::span<float> Tensor::row(std::size_t r) {
    const std::size_t n = last_dim();
    return std::span<float>(data_).subspan(r * n, n);
}

std::span<const float> Tensor::row(std::size_t r) const {
    const std::size_t n = last_dim();
    return std::span<const float>(data_).subspan(r * n, n);
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
    return resprobe::shape_string(shape_);
}

void gemm(std::span<const float> a, std::span<const float> b, std::span<float> out,
          std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        float* __restrict ci = out.data() + i * n;
        std::fill(ci, ci + n, 0.0f);
        const float* ai = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = ai[p];
            const float* __restrict bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void layer_norm_rows(std::span<const float> x, std::span<float> out, std::size_t dim) {
    const std::size_t rows = x.size() / dim;
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x.data() + r * dim;
        float* yr = out.data() + r * dim;
        double mean = 0.0;
        for (std::size_t i = 0; i < dim; ++i) mean += xr[i];
        mean /= static_cast<double>(dim);
        double var = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double c = xr[i] - mean;
            var += c * c;
        }
        var /= static_cast<double>(dim);
        const double rstd = 1.0 / std::sqrt(var + kNormEps);
        for (std::size_t i = 0; i < dim; ++i) yr[i] = static_cast<float>((xr[i] - mean) * rstd);
    }
}

void rms_norm_rows(std::span<const float> x, std::span<const float> gain, std::span<float> out,
                   std::size_t dim) {
    const std::size_t rows = x.size() / dim;
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x.data() + r * dim;
        float* yr = out.data() + r * dim;
        double ms = 0.0;
        for (std::size_t i = 0; i < dim; ++i) ms += static_cast<double>(xr[i]) * xr[i];
        ms /= static_cast<double>(dim);
        const double rstd = 1.0 / std::sqrt(ms + kNormEps);
        for (std::size_t i = 0; i < dim; ++i) yr[i] = static_cast<float>(xr[i] * rstd * gain[i]);
    }
}

void softmax_inplace(std::span<float> x) {
    if (x.empty()) return;
    const float mx = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (float& v : x) {
        v = std::exp(v - mx);
        sum += v;
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (float& v : x) v *= inv;
}

float dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return static_cast<float>(s);
}

float l2_norm(std::span<const float> a) {
    double s = 0.0;
    for (float v : a) s += static_cast<double>(v) * v;
    return static_cast<float>(std::sqrt(s));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul expects rank-2 tensors, got " + a.shape_string() + " and " +
                             b.shape_string());
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul inner dimensions differ: " + a.shape_string() + " x " +
                             b.shape_string());
    }
    Tensor out({m, n});
    gemm(a.data(), b.data(), out.data(), m, k, n);
    return out;
}

Tensor layer_norm_nonparametric(const Tensor& x) {
    if (x.empty()) throw DimensionError("layer_norm on empty tensor");
    Tensor out(x.shape());
    layer_norm_rows(x.data(), out.data(), x.last_dim());
    return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain) {
    if (x.empty()) throw DimensionError("rms_norm on empty tensor");
    if (gain.size() != x.last_dim()) {
        throw DimensionError("rms_norm gain length " + std::to_string(gain.size()) +
                             " != last dim " + std::to_string(x.last_dim()));
    }
    Tensor out(x.shape());
    rms_norm_rows(x.data(), gain.data(), out.data(), x.last_dim());
    return out;
}

Tensor softmax(const Tensor& x) {
    Tensor out = x;
    const std::size_t n = x.last_dim();
    for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.data().subspan(r * n, n));
    return out;
}

float l2_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw DimensionError("l2_distance length mismatch: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return static_cast<float>(std::sqrt(s));
}

float l2_distance(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("l2_distance shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    }
    return l2_distance(a.data(), b.data());
}

double projection_coefficient(std::span<const float> c, std::span<const float> a,
                             std::span<const float> b) {
    if (a.size() != b.size() || a.size() != c.size()) {
        throw DimensionError("projection operands differ in length");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double dir = static_cast<double>(b[i]) - a[i];
        num += (static_cast<double>(c[i]) - a[i]) * dir;
        den += dir * dir;
    }
    if (std::sqrt(den) < 1e-8) throw DegenerateLineError("projection line is degenerate: a == b");
    return num / den;
}

Tensor orthogonal_project(const Tensor& c, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() || a.shape() != c.shape()) {
        throw DimensionError("orthogonal_project shape mismatch");
    }
    const double t = projection_coefficient(c.data(), a.data(), b.data());
    Tensor p(a.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = static_cast<float>(a[i] + t * (static_cast<double>(b[i]) - a[i]));
    }
    return p;
}

}  // namespace resprobe
