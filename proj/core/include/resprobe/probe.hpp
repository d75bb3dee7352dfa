// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resprobe/model.hpp"
#include "resprobe/tokens.hpp"

namespace resprobe {

/// Output distance along the segment between two prompts' activations.
///
/// d[i] is the L2 distance between the clean final residual of prompt_a and
/// the final residual of prompt_a's run patched with A + alphas[i] (B - A).
/// r = d / d.back(); max_slope is the largest forward difference of r.
struct SweepResult {
    std::string label;
    std::size_t layer = 0;
    std::vector<double> alphas;
    std::vector<double> d;
    std::vector<double> r;
    double max_slope = 0.0;
    std::optional<std::vector<double>> logit_diff;

    friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

/// Pointwise median and quartiles of r over many sweeps on one grid.
struct AggregateCurve {
    std::vector<double> alphas;
    std::vector<double> median_r;
    std::vector<double> q25_r;
    std::vector<double> q75_r;
    double median_max_slope = 0.0;
    double q25_max_slope = 0.0;
    double q75_max_slope = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_rejected = 0;
};

/// Normalized logit difference logit[top_b] - logit[top_a] along a sweep.
struct LogitDiffTrace {
    std::vector<double> values;  // min-max normalized to [0, 1]
    std::vector<double> raw;
    TokenId top_a = 0;
    TokenId top_b = 0;
    bool flat = false;  // top_a == top_b or constant trace; values are all zero
};

struct SweepOptions {
    std::size_t layer = 0;
    std::size_t n_points = 50;
    bool logit_diff = false;
};

/// A sweep that may have been rejected (degenerate pair).
struct SweepOutcome {
    std::string label;
    std::optional<SweepResult> result;
    std::string error;
};

/// Relative distance is undefined below this final-residual distance.
inline constexpr double kDegenerateDistance = 1e-6;

/// (1 - alpha) a + alpha b; exact at both endpoints.
Tensor interpolate(const Tensor& a, const Tensor& b, double alpha);
void interpolate_into(std::span<const float> a, std::span<const float> b, double alpha, std::span<float> out);

/// {i / (n - 1)} for i in [0, n).
std::vector<double> alpha_grid(std::size_t n_points);

double max_slope(std::span<const double> r, std::span<const double> alphas);

/// Throws DegeneratePairError when d(1) < kDegenerateDistance.
SweepResult sweep(const Model& model, const PromptPair& pair, const SweepOptions& options = {});

LogitDiffTrace logit_diff_trace(const Model& model, const PromptPair& pair, std::size_t layer,
                                std::size_t n_points = 50);
/// Min-max normalization with the flat-trace rule applied.
LogitDiffTrace normalize_logit_diff(std::vector<double> raw, TokenId top_a, TokenId top_b);

/// Sweeps every pair independently on up to `threads` workers; outcomes keep
/// input order. Degenerate pairs are recorded, not thrown.
std::vector<SweepOutcome> sweep_all(const Model& model, std::span<const PromptPair> pairs,
                                    const SweepOptions& options, std::size_t threads);

/// Throws GridError when the sweeps do not share one alpha grid.
AggregateCurve aggregate(std::span<const SweepResult> results, std::size_t n_rejected = 0);

// Serialization.

nlohmann::json to_json(const SweepResult& s);
SweepResult sweep_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregateCurve& a);

/// One JSON record per line.
void write_sweeps_jsonl(const std::filesystem::path& path, std::span<const SweepResult> results);
/// Accepts a single record, a JSON list of records, or JSON Lines.
std::vector<SweepResult> read_sweep_file(const std::filesystem::path& path);
/// Columns: alpha, then r for each sweep (header uses the labels).
void write_curves_csv(const std::filesystem::path& path, std::span<const SweepResult> results);
/// Columns: alpha, median_r, q25_r, q75_r.
void write_aggregate_csv(const std::filesystem::path& path, const AggregateCurve& curve);

/// Shared JSON writer: two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace resprobe
