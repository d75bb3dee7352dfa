// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resprobe/tokenizer.hpp"
#include "resprobe/tokens.hpp"

namespace resprobe {

struct Corpus {
    std::string text;
    std::vector<std::filesystem::path> files;  // in concatenation order
};

/// A single file, or every regular non-hidden file of a directory
/// concatenated in lexicographic filename order.
Corpus load_corpus(const std::filesystem::path& path);

/// Minimum token distance between the two windows of a sampled pair.
inline constexpr std::size_t kDefaultPairSeparation = 1000;

/// Draws `n_pairs` pairs of `token_len`-token windows at uniform random
/// offsets. The two windows of a pair start at least `min_separation`
/// tokens apart. Deterministic for a given seed. Throws CorpusError when the
/// corpus is too small.
std::vector<PromptPair> sample_pairs(std::span<const TokenId> corpus_tokens, std::size_t n_pairs,
                                     std::size_t token_len, std::uint64_t seed,
                                     std::size_t min_separation = kDefaultPairSeparation);

std::vector<PromptPair> sample_pairs(const Corpus& corpus, const Tokenizer& tokenizer, std::size_t n_pairs,
                                     std::size_t token_len, std::uint64_t seed,
                                     std::size_t min_separation = kDefaultPairSeparation);

/// Prompts given as text, before tokenization.
struct TextPair {
    std::string label;
    std::string prompt_a;
    std::string prompt_b;
};

/// The six labeled reference pairs: dissimilar D1-D3 and similar S1-S3.
std::vector<TextPair> fixture_prompts();

std::vector<PromptPair> tokenize_pairs(std::span<const TextPair> pairs, const Tokenizer& tokenizer);

/// JSON list of {label, offsets, prompt_a, prompt_b} for auditability.
nlohmann::json pairs_manifest(std::span<const PromptPair> pairs);
std::vector<PromptPair> pairs_from_manifest(const nlohmann::json& manifest);

/// Seeded English-like text from a small phrase grammar. Used for demos and
/// tests when no real corpus is at hand.
std::string synthetic_text(std::size_t approx_chars, std::uint64_t seed);

}  // namespace resprobe
