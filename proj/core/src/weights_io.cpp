// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/weights_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "resprobe/error.hpp"

namespace resprobe {

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b.data(), 8);
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_f32s(std::ostream& os, std::span<const float> values) {
    std::vector<char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) buf[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((u >> (8 * b)) & 0xFF);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void save_rpw(const std::filesystem::path& path, const ModelConfig& config, const ModelWeights& weights,
              const nlohmann::json& metadata) {
    weights.validate(config);
    nlohmann::json header;
    header["format"] = "RPW1";
    header["config"] = config;
    nlohmann::json dir = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : weights.tensors()) {
        dir[name] = {{"shape", t.shape()}, {"offset", offset}};
        offset += t.size() * 4;
    }
    header["tensors"] = std::move(dir);
    header["metadata"] = metadata.is_null() ? nlohmann::json::object() : metadata;
    const std::string text = header.dump();

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw InputError("cannot open " + tmp.string() + " for writing");
        os.write(kRpwMagic, 4);
        put_u64(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [_, t] : weights.tensors()) put_f32s(os, t.data());
        if (!os) throw InputError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

WeightFile load_rpw(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open weight file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const std::string where = " in " + path.string();
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kRpwMagic, 4) != 0) {
        throw FormatError("not an RPW1 file (bad magic)" + where);
    }
    const std::uint64_t header_len = get_u64(bytes.data() + 4);
    if (header_len > bytes.size() - 12) throw FormatError("truncated header" + where);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed header JSON: ") + e.what() + where);
    }
    const std::size_t payload_start = 12 + header_len;
    const std::size_t payload_size = bytes.size() - payload_start;

    WeightFile out;
    if (!header.contains("config") || !header.contains("tensors")) {
        throw FormatError("header lacks config or tensor directory" + where);
    }
    out.config = header.at("config").get<ModelConfig>();
    out.config.validate();
    if (header.contains("metadata")) out.metadata = header["metadata"];
    for (const auto& [name, entry] : header.at("tensors").items()) {
        std::vector<std::size_t> shape;
        std::uint64_t offset = 0;
        try {
            shape = entry.at("shape").get<std::vector<std::size_t>>();
            offset = entry.at("offset").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad directory entry for " + name + ": " + e.what());
        }
        const std::size_t n = shape_product(shape);
        if (offset > payload_size || n * 4 > payload_size - offset) {
            throw FormatError("tensor " + name + " extends past end of payload" + where);
        }
        std::vector<float> data(n);
        const unsigned char* p = bytes.data() + payload_start + offset;
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t u = 0;
            for (int b = 3; b >= 0; --b) u = (u << 8) | p[i * 4 + static_cast<std::size_t>(b)];
            data[i] = std::bit_cast<float>(u);
        }
        out.weights.set(name, Tensor(std::move(shape), std::move(data)));
    }
    out.weights.validate(out.config);
    return out;
}

}  // namespace resprobe
