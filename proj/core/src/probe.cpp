// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resprobe/error.hpp"
#include "resprobe/parallel.hpp"
#include "resprobe/stats.hpp"

namespace resprobe {

void interpolate_into(std::span<const float> a, std::span<const float> b, double alpha, std::span<float> out) {
    if (a.size() != b.size() || out.size() != a.size()) {
        throw DimensionError("interpolate operands differ in length: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    const double keep = 1.0 - alpha;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<float>(keep * a[i] + alpha * b[i]);
    }
}

Tensor interpolate(const Tensor& a, const Tensor& b, double alpha) {
    if (a.shape() != b.shape()) {
        throw DimensionError("interpolate shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
    }
    Tensor out(a.shape());
    interpolate_into(a.data(), b.data(), alpha, out.data());
    return out;
}

std::vector<double> alpha_grid(std::size_t n_points) {
    if (n_points < 2) throw InputError("an alpha grid needs at least 2 points");
    std::vector<double> alphas(n_points);
    const double denom = static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) alphas[i] = static_cast<double>(i) / denom;
    return alphas;
}

double max_slope(std::span<const double> r, std::span<const double> alphas) {
    if (r.size() != alphas.size()) {
        throw DimensionError("max_slope: " + std::to_string(r.size()) + " values for " +
                             std::to_string(alphas.size()) + " alphas");
    }
    if (r.size() < 2) throw InputError("max_slope needs at least two samples");
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double step = alphas[i + 1] - alphas[i];
        if (!(step > 0.0)) throw InputError("alphas must be strictly increasing");
        best = std::max(best, (r[i + 1] - r[i]) / step);
    }
    return best;
}

LogitDiffTrace normalize_logit_diff(std::vector<double> raw, TokenId top_a, TokenId top_b) {
    LogitDiffTrace trace;
    trace.top_a = top_a;
    trace.top_b = top_b;
    trace.values.assign(raw.size(), 0.0);
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = raw.empty() ? 0.0 : *lo_it;
    const double hi = raw.empty() ? 0.0 : *hi_it;
    if (top_a == top_b || !(hi > lo)) {
        trace.flat = true;
    } else {
        for (std::size_t i = 0; i < raw.size(); ++i) trace.values[i] = (raw[i] - lo) / (hi - lo);
    }
    trace.raw = std::move(raw);
    return trace;
}

namespace {

struct SweepCore {
    std::vector<double> alphas;
    std::vector<double> d;
    std::optional<LogitDiffTrace> logit_diff;
};

SweepCore run_sweep(const Model& model, const PromptPair& pair, std::size_t layer, std::size_t n_points,
                    bool with_logit_diff) {
    const HookPoint hook = model.hook(layer);
    SweepCore core;
    core.alphas = alpha_grid(n_points);
    const PatchSession session_a(model, pair.prompt_a.ids, hook);
    Tensor b_act;
    TokenId top_b = 0;
    if (with_logit_diff) {
        const PatchSession session_b(model, pair.prompt_b.ids, hook);
        b_act = session_b.captured();
        top_b = top_prediction(session_b.clean().logits.data());
    } else {
        b_act = model.capture(pair.prompt_b.ids, hook);
    }
    const Tensor& a_act = session_a.captured();
    const auto clean_resid = session_a.clean().final_resid.data();
    const TokenId top_a = top_prediction(session_a.clean().logits.data());

    std::vector<float> x(a_act.size());
    std::vector<double> raw;
    core.d.reserve(n_points);
    for (double alpha : core.alphas) {
        interpolate_into(a_act.data(), b_act.data(), alpha, x);
        const ForwardOutput out = session_a.run(x);
        core.d.push_back(static_cast<double>(l2_distance(clean_resid, out.final_resid.data())));
        if (with_logit_diff) {
            raw.push_back(static_cast<double>(out.logits[static_cast<std::size_t>(top_b)]) -
                          static_cast<double>(out.logits[static_cast<std::size_t>(top_a)]));
        }
    }
    if (with_logit_diff) core.logit_diff = normalize_logit_diff(std::move(raw), top_a, top_b);
    return core;
}

}  // namespace

SweepResult sweep(const Model& model, const PromptPair& pair, const SweepOptions& options) {
    if (pair.prompt_a.empty() || pair.prompt_b.empty()) throw InputError("pair '" + pair.label + "' has an empty prompt");
    SweepCore core = run_sweep(model, pair, options.layer, options.n_points, options.logit_diff);
    const double end = core.d.back();
    if (!(end >= kDegenerateDistance)) {
        throw DegeneratePairError("pair '" + pair.label + "' is degenerate: d(1) = " + std::to_string(end));
    }
    SweepResult result;
    result.label = pair.label;
    result.layer = options.layer;
    result.alphas = std::move(core.alphas);
    result.r.reserve(core.d.size());
    for (double v : core.d) result.r.push_back(v / end);
    result.r.back() = 1.0;
    result.d = std::move(core.d);
    result.max_slope = max_slope(result.r, result.alphas);
    if (core.logit_diff) result.logit_diff = std::move(core.logit_diff->values);
    return result;
}

LogitDiffTrace logit_diff_trace(const Model& model, const PromptPair& pair, std::size_t layer, std::size_t n_points) {
    SweepCore core = run_sweep(model, pair, layer, n_points, true);
    return std::move(*core.logit_diff);
}

std::vector<SweepOutcome> sweep_all(const Model& model, std::span<const PromptPair> pairs, const SweepOptions& options,
                                    std::size_t threads) {
    std::vector<SweepOutcome> outcomes(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        outcomes[i].label = pairs[i].label;
        try {
            outcomes[i].result = sweep(model, pairs[i], options);
        } catch (const DegenerateError& e) {
            outcomes[i].error = e.what();
        }
    });
    return outcomes;
}

AggregateCurve aggregate(std::span<const SweepResult> results, std::size_t n_rejected) {
    if (results.empty()) throw InputError("aggregate needs at least one sweep");
    AggregateCurve curve;
    curve.alphas = results.front().alphas;
    const std::size_t n_alpha = curve.alphas.size();
    for (const auto& s : results) {
        if (s.alphas != curve.alphas || s.r.size() != n_alpha) {
            throw GridError("sweep '" + s.label + "' uses a different alpha grid (" + std::to_string(s.alphas.size()) +
                            " points vs " + std::to_string(n_alpha) + ")");
        }
    }
    std::vector<double> column(results.size());
    for (std::size_t i = 0; i < n_alpha; ++i) {
        for (std::size_t k = 0; k < results.size(); ++k) column[k] = results[k].r[i];
        curve.median_r.push_back(quantile(column, 0.5));
        curve.q25_r.push_back(quantile(column, 0.25));
        curve.q75_r.push_back(quantile(column, 0.75));
    }
    for (std::size_t k = 0; k < results.size(); ++k) column[k] = results[k].max_slope;
    curve.median_max_slope = quantile(column, 0.5);
    curve.q25_max_slope = quantile(column, 0.25);
    curve.q75_max_slope = quantile(column, 0.75);
    curve.n_pairs = results.size();
    curve.n_rejected = n_rejected;
    return curve;
}

}  // namespace resprobe
