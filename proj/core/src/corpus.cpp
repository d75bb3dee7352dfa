// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "resprobe/error.hpp"

namespace resprobe {

Corpus load_corpus(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    Corpus corpus;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            const std::string name = entry.path().filename().string();
            if (entry.is_regular_file() && !name.empty() && name[0] != '.') corpus.files.push_back(entry.path());
        }
        std::sort(corpus.files.begin(), corpus.files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    } else if (fs::is_regular_file(path)) {
        corpus.files.push_back(path);
    } else {
        throw CorpusError("corpus path does not exist: " + path.string());
    }
    if (corpus.files.empty()) throw CorpusError("no corpus files under " + path.string());
    for (const auto& f : corpus.files) {
        std::ifstream is(f, std::ios::binary);
        if (!is) throw CorpusError("cannot read " + f.string());
        std::ostringstream ss;
        ss << is.rdbuf();
        corpus.text += ss.str();
    }
    return corpus;
}

std::vector<PromptPair> sample_pairs(std::span<const TokenId> tokens, std::size_t n_pairs, std::size_t token_len,
                                     std::uint64_t seed, std::size_t min_separation) {
    if (n_pairs == 0) throw InputError("n_pairs must be at least 1");
    if (token_len == 0) throw InputError("token_len must be at least 1");
    const std::size_t n = tokens.size();
    if (n < 2 * token_len * n_pairs) {
        throw CorpusError("corpus has " + std::to_string(n) + " tokens; " + std::to_string(n_pairs) + " pairs of " +
                          std::to_string(token_len) + " tokens need at least " +
                          std::to_string(2 * token_len * n_pairs));
    }
    const std::size_t last_start = n - token_len;
    if (last_start < min_separation) {
        throw CorpusError("corpus of " + std::to_string(n) + " tokens cannot hold two windows " +
                          std::to_string(min_separation) + " tokens apart");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> offset_dist(0, last_start);
    auto window = [&](std::size_t off) {
        TokenSequence s;
        s.ids.assign(tokens.begin() + static_cast<std::ptrdiff_t>(off),
                     tokens.begin() + static_cast<std::ptrdiff_t>(off + token_len));
        s.source_offset = off;
        return s;
    };
    std::vector<PromptPair> pairs;
    pairs.reserve(n_pairs);
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t a = offset_dist(rng);
        std::size_t b = 0;
        bool found = false;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            b = offset_dist(rng);
            if ((a > b ? a - b : b - a) >= min_separation) {
                found = true;
                break;
            }
        }
        if (!found) throw CorpusError("could not find an unrelated window for pair " + std::to_string(p));
        char label[32];
        std::snprintf(label, sizeof label, "P%04zu", p);
        pairs.push_back(PromptPair{window(a), window(b), label});
    }
    return pairs;
}

std::vector<PromptPair> sample_pairs(const Corpus& corpus, const Tokenizer& tokenizer, std::size_t n_pairs,
                                     std::size_t token_len, std::uint64_t seed, std::size_t min_separation) {
    const std::vector<TokenId> ids = tokenizer.encode(corpus.text);
    return sample_pairs(ids, n_pairs, token_len, seed, min_separation);
}

std::vector<TextPair> fixture_prompts() {
    return {
        {"D1", " The house at the end of the street was very", " The house at the end of the street was in"},
        {"D2", " He suddenly looked at his watch and realized he was",
         " He suddenly looked at his watch and realized he had"},
        {"D3", " And then she picked up the phone to call her", " And then she picked up the phone to call him"},
        {"S1", " She opened the dusty book and a cloud of mist", " She opened the dusty book and a cloud of dust"},
        {"S2", " In the quiet library, students flipped through pages of",
         " In the quiet library, students flipped through pages in"},
        {"S3", " The hiker reached the peak and admired the breathtaking",
         " The hiker reached the peak and admired the spectacular"},
    };
}

std::vector<PromptPair> tokenize_pairs(std::span<const TextPair> pairs, const Tokenizer& tokenizer) {
    std::vector<PromptPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back(PromptPair{TokenSequence{tokenizer.encode(p.prompt_a), std::nullopt},
                                 TokenSequence{tokenizer.encode(p.prompt_b), std::nullopt}, p.label});
    }
    return out;
}

nlohmann::json pairs_manifest(std::span<const PromptPair> pairs) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : pairs) {
        nlohmann::json offsets = nlohmann::json::array();
        offsets.push_back(p.prompt_a.source_offset ? nlohmann::json(*p.prompt_a.source_offset) : nlohmann::json());
        offsets.push_back(p.prompt_b.source_offset ? nlohmann::json(*p.prompt_b.source_offset) : nlohmann::json());
        list.push_back({{"label", p.label}, {"offsets", offsets}, {"prompt_a", p.prompt_a.ids}, {"prompt_b", p.prompt_b.ids}});
    }
    return list;
}

std::vector<PromptPair> pairs_from_manifest(const nlohmann::json& manifest) {
    if (!manifest.is_array()) throw FormatError("pair manifest must be a JSON list");
    std::vector<PromptPair> out;
    try {
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            const auto& e = manifest[i];
            PromptPair p;
            p.label = e.value("label", "P" + std::to_string(i));
            p.prompt_a.ids = e.at("prompt_a").get<std::vector<TokenId>>();
            p.prompt_b.ids = e.at("prompt_b").get<std::vector<TokenId>>();
            if (e.contains("offsets") && e["offsets"].is_array() && e["offsets"].size() == 2) {
                if (e["offsets"][0].is_number()) p.prompt_a.source_offset = e["offsets"][0].get<std::size_t>();
                if (e["offsets"][1].is_number()) p.prompt_b.source_offset = e["offsets"][1].get<std::size_t>();
            }
            if (p.prompt_a.empty() || p.prompt_b.empty()) throw FormatError("pair '" + p.label + "' has an empty prompt");
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed pair manifest: ") + e.what());
    }
    return out;
}

}  // namespace resprobe
