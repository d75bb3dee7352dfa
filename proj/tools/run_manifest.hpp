// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace resprobe::cli {

/// Provenance record written next to every output of a run.
struct RunManifest {
    std::string subcommand;
    nlohmann::json parameters = nlohmann::json::object();
    std::map<std::string, std::string> input_hashes;  // path -> sha256 hex
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string timestamp;  // UTC, ISO 8601

    void add_input(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void write(const std::filesystem::path& dir) const;
};

RunManifest make_manifest(std::string subcommand, std::uint64_t seed);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Honors SOURCE_DATE_EPOCH so reproducible runs can pin the clock.
std::string utc_timestamp();

}  // namespace resprobe::cli
