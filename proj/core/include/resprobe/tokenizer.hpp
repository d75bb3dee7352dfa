// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "resprobe/tokens.hpp"

namespace resprobe {

enum class TokenizerKind { char_level, bpe };

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual TokenizerKind kind() const noexcept = 0;
    virtual std::size_t vocab_size() const noexcept = 0;
    /// Throws VocabError for text the vocabulary cannot represent.
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::string decode(std::span<const TokenId> ids) const = 0;
};

/// One token per Unicode code point.
///
/// The vocabulary always contains printable ASCII, tab and newline, plus any
/// other code point seen in the text it was built from; ids follow code
/// point order.
class CharTokenizer final : public Tokenizer {
public:
    explicit CharTokenizer(std::vector<char32_t> code_points);

    static CharTokenizer from_text(std::string_view text);
    /// Vocabulary file: one token per line; `\n`, `\t`, `\r` and `\\` are escaped.
    static CharTokenizer load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    TokenizerKind kind() const noexcept override { return TokenizerKind::char_level; }
    std::size_t vocab_size() const noexcept override { return code_points_.size(); }
    std::vector<TokenId> encode(std::string_view text) const override;
    std::string decode(std::span<const TokenId> ids) const override;

    const std::vector<char32_t>& code_points() const noexcept { return code_points_; }

private:
    std::vector<char32_t> code_points_;
    std::unordered_map<char32_t, TokenId> index_;
};

/// Byte-level BPE in the GPT-2 layout: `vocab.json` maps token strings to
/// ids, `merges.txt` lists merge rules by priority.
class BpeTokenizer final : public Tokenizer {
public:
    BpeTokenizer(std::map<std::string, TokenId> vocab,
                 std::vector<std::pair<std::string, std::string>> merges);

    static BpeTokenizer load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt);

    TokenizerKind kind() const noexcept override { return TokenizerKind::bpe; }
    std::size_t vocab_size() const noexcept override { return id_to_token_.size(); }
    std::vector<TokenId> encode(std::string_view text) const override;
    std::string decode(std::span<const TokenId> ids) const override;

    /// GPT-2 style split into words before merging.
    static std::vector<std::string> pretokenize(std::string_view text);

private:
    std::vector<std::string> bpe(const std::string& word) const;

    std::map<std::string, TokenId> vocab_;
    std::vector<std::string> id_to_token_;
    std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
};

/// BPE when `merges` is given, char-level otherwise.
std::unique_ptr<Tokenizer> load_tokenizer(const std::filesystem::path& vocab,
                                          const std::optional<std::filesystem::path>& merges = std::nullopt);

// UTF-8 helpers.
std::vector<char32_t> utf8_decode(std::string_view text);
std::string utf8_encode(std::span<const char32_t> cps);
void utf8_append(std::string& out, char32_t cp);

}  // namespace resprobe
