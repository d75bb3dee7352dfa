// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_manifest.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "resprobe/error.hpp"
#include "resprobe/probe.hpp"
#include "resprobe/version.hpp"

namespace resprobe::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path.string() + " for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 initialization failed");
    }
    std::array<char, 1 << 16> buf{};
    while (is) {
        is.read(buf.data(), buf.size());
        const auto got = is.gcount();
        if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        char byte[3];
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end != epoch && *end == '\0') now = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest make_manifest(std::string subcommand, std::uint64_t seed) {
    RunManifest m;
    m.subcommand = std::move(subcommand);
    m.seed = seed;
    m.tool_version = kVersion;
    m.timestamp = utc_timestamp();
    return m;
}

void RunManifest::add_input(const std::filesystem::path& path) {
    input_hashes[path.string()] = sha256_file(path);
}

nlohmann::json RunManifest::to_json() const {
    return {
        {"subcommand", subcommand},
        {"parameters", parameters},
        {"input_hashes", input_hashes},
        {"seed", seed},
        {"tool_version", tool_version},
        {"timestamp", timestamp},
    };
}

void RunManifest::write(const std::filesystem::path& dir) const {
    write_json_file(dir / "run_manifest.json", to_json());
}

}  // namespace resprobe::cli
