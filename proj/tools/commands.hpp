// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace resprobe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDegenerate = 3;

namespace fs = std::filesystem;

struct TokenizerFlags {
    std::optional<fs::path> vocab;
    std::optional<fs::path> merges;
};

struct TrainFlags {
    std::string preset = "tiny";
    std::optional<fs::path> corpus;
    std::size_t synthetic_chars = 3'000'000;
    TokenizerFlags tokenizer;
    std::uint64_t tokens = 2'097'152;
    std::size_t checkpoints = 6;
    std::uint64_t first_mark = 0;  // 0: one optimizer step
    std::optional<double> learning_rate;
    std::optional<std::size_t> batch_size;
    std::uint64_t seed = 1;
    fs::path out = "runs/train";
};

struct SweepFlags {
    fs::path weights;
    TokenizerFlags tokenizer;
    std::optional<fs::path> pairs;
    bool fixtures = false;
    std::optional<fs::path> corpus;
    std::size_t n_pairs = 100;
    std::size_t token_len = 10;
    std::size_t min_separation = 1000;
    std::size_t layer = 0;
    std::size_t points = 50;
    bool logit_diff = false;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    fs::path out = "runs/sweep";
};

struct SliceFlags {
    std::vector<std::string> weights;  // files or glob patterns
    TokenizerFlags tokenizer;
    std::vector<std::string> prompts;  // three texts
    std::optional<fs::path> corpus;    // draw three windows instead
    std::size_t token_len = 10;
    std::size_t min_separation = 1000;
    std::uint64_t seed = 0;
    std::size_t layer = 0;
    std::size_t n_alpha = 64;
    std::size_t n_beta = 64;
    std::vector<double> alpha_range = {-0.25, 1.25};
    std::vector<double> beta_range = {-0.25, 1.25};
    std::size_t threads = 0;
    fs::path out = "runs/slice";
};

struct AggregateFlags {
    std::vector<fs::path> inputs;
    fs::path out = "runs/aggregate";
};

struct GenCorpusFlags {
    std::size_t chars = 3'000'000;
    std::uint64_t seed = 0;
    fs::path out = "corpus.txt";
};

struct GradcheckFlags {
    std::string preset = "micro";
    std::size_t seq_len = 8;
    std::size_t samples = 3;
    double tolerance = 1e-3;
    std::uint64_t seed = 0;
};

struct CheckFixtureFlags {
    fs::path weights;
    fs::path fixture;
    TokenizerFlags tokenizer;
    double tolerance = 1e-3;
};

int cmd_train(const TrainFlags& flags);
int cmd_sweep(const SweepFlags& flags);
int cmd_slice(const SliceFlags& flags);
int cmd_aggregate(const AggregateFlags& flags);
int cmd_gen_corpus(const GenCorpusFlags& flags);
int cmd_gradcheck(const GradcheckFlags& flags);
int cmd_check_fixture(const CheckFixtureFlags& flags);

/// Expands `*` and `?` in the file-name part of each pattern; literal paths
/// pass through. Matches are sorted.
std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns);

}  // namespace resprobe::cli
