// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resprobe/model.hpp"
#include "resprobe/tokens.hpp"

namespace resprobe {

struct Range {
    double lo = -0.25;
    double hi = 1.25;
};

/// Plane through three prompts' activations, sampled on an
/// n_alpha x n_beta grid that includes both ends of each range.
struct SliceSpec {
    std::array<TokenSequence, 3> prompts;
    std::size_t layer = 0;
    std::size_t n_alpha = 64;
    std::size_t n_beta = 64;
    Range alpha_range;
    Range beta_range;

    /// Throws InputError when the grid or ranges are invalid.
    void validate() const;
};

/// The plane X = A + alpha (B - A) + beta (C - P), with P the foot of C on line(A, B).
struct SliceGeometry {
    Tensor a, b, c;
    std::vector<double> offset;  // C - P
    double t = 0.0;              // P = A + t (B - A)
    double orthogonality_residual = 0.0;  // |<C-P, B-A>| / (|C-P| |B-A|)

    /// Throws DegenerateSliceError when A == B or C lies on line(A, B).
    static SliceGeometry from(const Tensor& a, const Tensor& b, const Tensor& c);

    void point(double alpha, double beta, std::span<float> out) const;
};

Tensor synth_activation(const Tensor& a, const Tensor& b, const Tensor& c, double alpha, double beta);

using Rgb = std::array<double, 3>;

/// Rendered slice. Pixels are row-major with row 0 at the top (beta = hi)
/// and column 0 at alpha = lo.
struct SliceImage {
    std::size_t width = 0;   // n_alpha
    std::size_t height = 0;  // n_beta
    std::vector<double> alphas;  // per column
    std::vector<double> betas;   // per row, descending
    std::vector<Rgb> raw;        // (d_A, d_B, d_C)
    std::vector<Rgb> normalized; // each channel divided by its slice maximum
    std::vector<Rgb> rgb;        // 1 - normalized
    Rgb channel_max{};
    std::array<bool, 3> zero_channel{};  // channel max was zero; normalized set to 0
    double projection_t = 0.0;
    double orthogonality_residual = 0.0;
    std::size_t layer = 0;
    std::array<std::vector<TokenId>, 3> prompts;
    std::optional<std::uint64_t> checkpoint_tokens;
    Range alpha_range;
    Range beta_range;

    std::size_t index(std::size_t row, std::size_t col) const { return row * width + col; }
    /// Pixel whose grid coordinates are closest to (alpha, beta).
    std::pair<std::size_t, std::size_t> nearest_pixel(double alpha, double beta) const;
};

/// Colors each grid point by its similarity to the three reference outputs:
/// d_A uses prompt A's context for both the clean and patched runs, and
/// likewise for B and C. Three patched forwards per pixel.
SliceImage render_slice(const Model& model, const SliceSpec& spec, std::size_t threads = 1);

/// Re-normalizes raw distances into `normalized` and `rgb`.
void normalize_slice(SliceImage& image);

/// Binary P6, 8-bit channels, value = round(channel * 255).
void write_ppm(const SliceImage& image, const std::filesystem::path& path);
std::string encode_ppm(const SliceImage& image);

/// Sidecar with geometry, metadata and raw per-pixel distances.
nlohmann::json slice_sidecar(const SliceImage& image);

/// Absolute RGB channel differences over all 4-neighbour pixel pairs.
std::vector<double> neighbor_differences(const SliceImage& image);
/// Given quantile of neighbor_differences; 0.99 is the default sharpness.
double slice_sharpness(const SliceImage& image, double q = 0.99);

}  // namespace resprobe
