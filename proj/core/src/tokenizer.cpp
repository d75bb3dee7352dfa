// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "resprobe/error.hpp"

namespace resprobe {

std::vector<char32_t> utf8_decode(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (c < 0x80) {
            len = 1;
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            throw VocabError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > text.size()) throw VocabError("truncated UTF-8 sequence at offset " + std::to_string(i));
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) throw VocabError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
            cp = (cp << 6) | (cc & 0x3F);
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void utf8_append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string utf8_encode(std::span<const char32_t> cps) {
    std::string out;
    for (char32_t cp : cps) utf8_append(out, cp);
    return out;
}

// ---------------------------------------------------------------- char-level

CharTokenizer::CharTokenizer(std::vector<char32_t> code_points) : code_points_(std::move(code_points)) {
    std::sort(code_points_.begin(), code_points_.end());
    code_points_.erase(std::unique(code_points_.begin(), code_points_.end()), code_points_.end());
    if (code_points_.size() < 2) throw VocabError("char vocabulary needs at least two entries");
    for (std::size_t i = 0; i < code_points_.size(); ++i) index_[code_points_[i]] = static_cast<TokenId>(i);
}

CharTokenizer CharTokenizer::from_text(std::string_view text) {
    std::set<char32_t> cps = {U'\t', U'\n'};
    for (char32_t c = 0x20; c <= 0x7E; ++c) cps.insert(c);
    for (char32_t c : utf8_decode(text)) cps.insert(c);
    return CharTokenizer(std::vector<char32_t>(cps.begin(), cps.end()));
}

CharTokenizer CharTokenizer::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open tokenizer vocabulary " + path.string());
    std::vector<char32_t> cps;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string tok;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '\\' && i + 1 < line.size()) {
                const char e = line[++i];
                tok.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e == 'r' ? '\r' : e);
            } else {
                tok.push_back(line[i]);
            }
        }
        const auto decoded = utf8_decode(tok);
        if (decoded.size() != 1) {
            throw FormatError("char vocabulary line " + std::to_string(line_no) + " is not a single code point");
        }
        cps.push_back(decoded[0]);
    }
    return CharTokenizer(std::move(cps));
}

void CharTokenizer::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write tokenizer vocabulary " + path.string());
    for (char32_t cp : code_points_) {
        switch (cp) {
            case U'\n': os << "\\n"; break;
            case U'\t': os << "\\t"; break;
            case U'\r': os << "\\r"; break;
            case U'\\': os << "\\\\"; break;
            default: {
                std::string s;
                utf8_append(s, cp);
                os << s;
            }
        }
        os << '\n';
    }
}

std::vector<TokenId> CharTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (char32_t cp : utf8_decode(text)) {
        auto it = index_.find(cp);
        if (it == index_.end()) {
            throw VocabError("character U+" + std::to_string(static_cast<unsigned>(cp)) + " not in vocabulary");
        }
        ids.push_back(it->second);
    }
    return ids;
}

std::string CharTokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= code_points_.size()) {
            throw VocabError("token id " + std::to_string(id) + " out of range");
        }
        utf8_append(out, code_points_[static_cast<std::size_t>(id)]);
    }
    return out;
}

// ---------------------------------------------------------------- byte-level BPE

namespace {

// Printable bytes map to themselves; the rest are shifted past U+0100 so
// every byte has a visible, non-whitespace stand-in.
const std::array<char32_t, 256>& byte_to_unicode() {
    static const std::array<char32_t, 256> table = [] {
        std::array<char32_t, 256> t{};
        std::array<bool, 256> direct{};
        for (int b = '!'; b <= '~'; ++b) direct[static_cast<std::size_t>(b)] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[static_cast<std::size_t>(b)] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[static_cast<std::size_t>(b)] = true;
        char32_t next = 256;
        for (std::size_t b = 0; b < 256; ++b) t[b] = direct[b] ? static_cast<char32_t>(b) : next++;
        return t;
    }();
    return table;
}

const std::unordered_map<char32_t, unsigned char>& unicode_to_byte() {
    static const std::unordered_map<char32_t, unsigned char> table = [] {
        std::unordered_map<char32_t, unsigned char> t;
        const auto& fwd = byte_to_unicode();
        for (std::size_t b = 0; b < 256; ++b) t[fwd[b]] = static_cast<unsigned char>(b);
        return t;
    }();
    return table;
}

bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}
bool is_digit(char32_t c) {
    return c >= U'0' && c <= U'9';
}
// Non-ASCII code points count as letters; ASCII uses the usual classes.
bool is_letter(char32_t c) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || c >= 0x80;
}
bool is_other(char32_t c) {
    return !is_space(c) && !is_digit(c) && !is_letter(c);
}

}  // namespace

BpeTokenizer::BpeTokenizer(std::map<std::string, TokenId> vocab,
                           std::vector<std::pair<std::string, std::string>> merges)
    : vocab_(std::move(vocab)) {
    TokenId max_id = -1;
    for (const auto& [tok, id] : vocab_) {
        if (id < 0) throw FormatError("negative id for BPE token '" + tok + "'");
        max_id = std::max(max_id, id);
    }
    if (max_id < 1) throw FormatError("BPE vocabulary needs at least two entries");
    id_to_token_.assign(static_cast<std::size_t>(max_id) + 1, std::string());
    for (const auto& [tok, id] : vocab_) id_to_token_[static_cast<std::size_t>(id)] = tok;
    for (std::size_t r = 0; r < merges.size(); ++r) ranks_.emplace(std::move(merges[r]), r);
}

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt) {
    std::ifstream vs(vocab_json);
    if (!vs) throw InputError("cannot open BPE vocabulary " + vocab_json.string());
    std::map<std::string, TokenId> vocab;
    try {
        const auto j = nlohmann::json::parse(vs);
        for (const auto& [tok, id] : j.items()) vocab[tok] = id.get<TokenId>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed BPE vocabulary: " + std::string(e.what()));
    }
    std::ifstream ms(merges_txt);
    if (!ms) throw InputError("cannot open BPE merges " + merges_txt.string());
    std::vector<std::pair<std::string, std::string>> merges;
    std::string line;
    while (std::getline(ms, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("#version", 0) == 0) continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw FormatError("malformed merge rule: '" + line + "'");
        merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return BpeTokenizer(std::move(vocab), std::move(merges));
}

std::vector<std::string> BpeTokenizer::pretokenize(std::string_view text) {
    const std::vector<char32_t> cps = utf8_decode(text);
    const std::size_t n = cps.size();
    std::vector<std::string> words;
    auto emit = [&](std::size_t a, std::size_t b) {
        words.push_back(utf8_encode(std::span<const char32_t>(cps).subspan(a, b - a)));
    };
    std::size_t i = 0;
    while (i < n) {
        const char32_t c = cps[i];
        if (c == U'\'' && i + 1 < n) {
            static const std::array<std::u32string_view, 7> contractions = {U"s", U"t", U"re", U"ve", U"m", U"ll", U"d"};
            bool matched = false;
            for (auto suffix : contractions) {
                if (i + 1 + suffix.size() <= n &&
                    std::u32string_view(cps.data() + i + 1, suffix.size()) == suffix) {
                    emit(i, i + 1 + suffix.size());
                    i += 1 + suffix.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        std::size_t start = i;
        std::size_t j = i;
        if (c == U' ' && i + 1 < n && !is_space(cps[i + 1])) j = i + 1;
        const char32_t head = cps[j];
        if (!is_space(head)) {
            auto same_class = is_letter(head) ? is_letter : is_digit(head) ? is_digit : is_other;
            std::size_t k = j;
            while (k < n && same_class(cps[k])) ++k;
            emit(start, k);
            i = k;
            continue;
        }
        std::size_t k = i;
        while (k < n && is_space(cps[k])) ++k;
        if (k < n && k - i >= 2) --k;  // leave one space to prefix the next word
        emit(i, k);
        i = k;
    }
    return words;
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& word) const {
    std::vector<std::string> parts;
    for (char32_t cp : utf8_decode(word)) {
        std::string s;
        utf8_append(s, cp);
        parts.push_back(std::move(s));
    }
    while (parts.size() > 1) {
        std::size_t best_rank = std::numeric_limits<std::size_t>::max();
        std::size_t best = 0;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            auto it = ranks_.find({parts[i], parts[i + 1]});
            if (it != ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best = i;
            }
        }
        if (best_rank == std::numeric_limits<std::size_t>::max()) break;
        const std::string left = parts[best], right = parts[best + 1];
        std::vector<std::string> merged;
        for (std::size_t i = 0; i < parts.size();) {
            if (i + 1 < parts.size() && parts[i] == left && parts[i + 1] == right) {
                merged.push_back(left + right);
                i += 2;
            } else {
                merged.push_back(parts[i]);
                ++i;
            }
        }
        parts = std::move(merged);
    }
    return parts;
}

std::vector<TokenId> BpeTokenizer::encode(std::string_view text) const {
    const auto& b2u = byte_to_unicode();
    std::vector<TokenId> ids;
    for (const std::string& word : pretokenize(text)) {
        std::string mapped;
        for (char ch : word) utf8_append(mapped, b2u[static_cast<unsigned char>(ch)]);
        for (const std::string& piece : bpe(mapped)) {
            auto it = vocab_.find(piece);
            if (it == vocab_.end()) throw VocabError("BPE piece '" + piece + "' not in vocabulary");
            ids.push_back(it->second);
        }
    }
    return ids;
}

std::string BpeTokenizer::decode(std::span<const TokenId> ids) const {
    const auto& u2b = unicode_to_byte();
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
            throw VocabError("token id " + std::to_string(id) + " out of range");
        }
        for (char32_t cp : utf8_decode(id_to_token_[static_cast<std::size_t>(id)])) {
            auto it = u2b.find(cp);
            if (it == u2b.end()) throw VocabError("BPE token contains unmapped code point");
            out.push_back(static_cast<char>(it->second));
        }
    }
    return out;
}

std::unique_ptr<Tokenizer> load_tokenizer(const std::filesystem::path& vocab,
                                          const std::optional<std::filesystem::path>& merges) {
    if (merges) return std::make_unique<BpeTokenizer>(BpeTokenizer::load(vocab, *merges));
    return std::make_unique<CharTokenizer>(CharTokenizer::load(vocab));
}

}  // namespace resprobe
