// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resprobe/model.hpp"
#include "resprobe/tokens.hpp"

namespace resprobe {

/// Next-token training setup for a small decoder-only model.
///
/// Supported architecture subset: rotary or learned positions, SwiGLU MLP,
/// no linear biases, non-parametric layer norm or RMSNorm.
struct TrainConfig {
    ModelConfig model;
    std::size_t seq_len = 64;
    std::size_t batch_size = 16;  // sequences per step
    std::uint64_t total_tokens = 0;

    double learning_rate = 3e-3;
    double min_lr_ratio = 0.1;  // cosine floor as a fraction of the peak
    std::size_t warmup_steps = 50;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;  // global-norm clip; 0 disables
    double init_std = 0.02;

    /// Token counts to checkpoint at; strictly increasing, last == total_tokens
    /// (empty means only the end of training),
    /// each a multiple of tokens_per_step(). The initialization is always
    /// saved in addition, as tokens_seen = 0.
    std::vector<std::uint64_t> checkpoint_tokens;
    std::uint64_t seed = 1;

    /// Fraction of the corpus tail held out for evaluation.
    double holdout_fraction = 0.05;
    std::size_t eval_batches = 4;

    std::uint64_t tokens_per_step() const { return static_cast<std::uint64_t>(seq_len) * batch_size; }
    std::uint64_t total_steps() const { return total_tokens / tokens_per_step(); }
    double lr_at(std::uint64_t step) const;

    /// Throws ConfigError on an unsupported architecture or bad schedule.
    void validate() const;
};

/// `count` log-spaced token marks from `first` to `total`, each rounded to a
/// multiple of `granularity`; duplicates after rounding are dropped.
std::vector<std::uint64_t> log_spaced_marks(std::uint64_t first, std::uint64_t total, std::size_t count,
                                            std::uint64_t granularity);

/// Named presets: "tiny" (D=64, 4 layers) and "micro" (D=32, 2 layers).
/// Token budgets and checkpoint marks are left for the caller.
TrainConfig train_preset(std::string_view name, std::size_t vocab_size);

struct Checkpoint {
    ModelWeights weights;
    std::uint64_t tokens_seen = 0;
    double loss_at_save = 0.0;  // held-out cross-entropy
};

struct TrainLogRow {
    std::uint64_t step = 0;
    std::uint64_t tokens_seen = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainCallbacks {
    std::function<void(const Checkpoint&)> on_checkpoint;
    std::function<void(const TrainLogRow&)> on_step;
    bool keep_checkpoints = true;  // return them from train()
};

/// Random initialization used by train(); deterministic for a seed.
ModelWeights init_weights(const ModelConfig& config, double init_std, std::uint64_t seed);

/// Trains with AdamW, linear warmup and cosine decay, on random windows of
/// the corpus head. Deterministic for a given seed. Throws DivergenceError if
/// the loss stops being finite.
std::vector<Checkpoint> train(const TrainConfig& config, std::span<const TokenId> corpus_tokens,
                              const TrainCallbacks& callbacks = {});

/// Mean next-token cross-entropy of `weights` on `windows` (each seq_len + 1 tokens).
double evaluate_loss(const ModelConfig& config, const ModelWeights& weights,
                     std::span<const std::vector<TokenId>> windows);

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
    /// Parameters to probe; nullopt probes every parameter, an empty list none.
    std::optional<std::vector<std::string>> params;
    std::size_t samples_per_param = 3;
    double step = 1e-3;
    double tolerance = 1e-3;
    double init_std = 0.1;
    std::uint64_t seed = 0;
    /// Test hook: scale the analytic gradient of this parameter by 1.5.
    std::optional<std::string> corrupt_param;
};

struct GradcheckEntry {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool ok = true;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double tolerance = 0.0;

    bool passed() const;
    double max_rel_error() const;
    /// Name of the first failing parameter, empty if all pass.
    std::string first_failure() const;
};

/// Compares analytic gradients of the training loss with central finite
/// differences, in double precision, on one batch of `sample` (length >= 2).
GradcheckReport gradcheck(const ModelConfig& config, std::span<const TokenId> sample,
                          const GradcheckOptions& options = {});

}  // namespace resprobe
