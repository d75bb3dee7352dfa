// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "resprobe/model.hpp"

namespace resprobe {

/// RPW1 weight file layout:
///
///   "RPW1"                      4 magic bytes
///   header_len                  u64, little-endian
///   header                      header_len bytes of UTF-8 JSON:
///     { "format": "RPW1",
///       "config": { ModelConfig fields },
///       "tensors": { name: { "shape": [...], "offset": bytes }, ... },
///       "metadata": { ... } }
///   payload                     little-endian f32, row-major, tensors in
///                               directory (sorted name) order; offsets are
///                               relative to the first payload byte
inline constexpr char kRpwMagic[4] = {'R', 'P', 'W', '1'};

struct WeightFile {
    ModelConfig config;
    ModelWeights weights;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Writes atomically: a temporary sibling file is renamed over `path`.
void save_rpw(const std::filesystem::path& path, const ModelConfig& config, const ModelWeights& weights,
              const nlohmann::json& metadata = nlohmann::json::object());

/// Throws FormatError on a malformed file and ConfigError on a bad config.
WeightFile load_rpw(const std::filesystem::path& path);

inline Model load_model(const std::filesystem::path& path) {
    WeightFile f = load_rpw(path);
    return Model(std::move(f.config), std::move(f.weights));
}

}  // namespace resprobe
