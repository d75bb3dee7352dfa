// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace resprobe {

/// Quantile with linear interpolation between order statistics
/// (h = (n-1)q). Throws InputError on empty input or q outside [0, 1].
double quantile(std::span<const double> values, double q);
inline double median(std::span<const double> values) { return quantile(values, 0.5); }

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(std::span<const double> values);

/// Spearman rank correlation: Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace resprobe
