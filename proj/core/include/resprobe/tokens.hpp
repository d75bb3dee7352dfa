// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace resprobe {

using TokenId = std::int32_t;

/// A prompt as token ids, optionally remembering where it was cut from a corpus.
struct TokenSequence {
    std::vector<TokenId> ids;
    std::optional<std::size_t> source_offset;

    std::size_t size() const noexcept { return ids.size(); }
    bool empty() const noexcept { return ids.empty(); }

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Two prompts whose last-position activations are interpolated.
struct PromptPair {
    TokenSequence prompt_a;
    TokenSequence prompt_b;
    std::string label;  // e.g. "D1", "S1", "P0042"
};

}  // namespace resprobe
