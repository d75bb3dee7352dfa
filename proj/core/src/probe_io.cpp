// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "resprobe/error.hpp"
#include "resprobe/probe.hpp"

namespace resprobe {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    return os;
}

// Shortest representation that round-trips a double.
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    for (int precision = 6; precision < 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return s;
}

}  // namespace

nlohmann::json to_json(const SweepResult& s) {
    nlohmann::json j = {
        {"label", s.label}, {"layer", s.layer}, {"alphas", s.alphas},
        {"d", s.d},         {"r", s.r},         {"max_slope", s.max_slope},
    };
    if (s.logit_diff) j["logit_diff"] = *s.logit_diff;
    return j;
}

SweepResult sweep_from_json(const nlohmann::json& j) {
    SweepResult s;
    try {
        s.label = j.value("label", std::string());
        s.layer = j.value("layer", std::size_t{0});
        s.alphas = j.at("alphas").get<std::vector<double>>();
        s.d = j.value("d", std::vector<double>{});
        s.r = j.at("r").get<std::vector<double>>();
        s.max_slope = j.at("max_slope").get<double>();
        if (j.contains("logit_diff")) s.logit_diff = j["logit_diff"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed sweep record: ") + e.what());
    }
    if (s.r.size() != s.alphas.size()) throw FormatError("sweep record '" + s.label + "': r and alphas differ in length");
    return s;
}

nlohmann::json to_json(const AggregateCurve& a) {
    return {
        {"alphas", a.alphas},
        {"median_r", a.median_r},
        {"q25_r", a.q25_r},
        {"q75_r", a.q75_r},
        {"max_slope", {{"median", a.median_max_slope}, {"q25", a.q25_max_slope}, {"q75", a.q75_max_slope}}},
        {"n_pairs", a.n_pairs},
        {"n_rejected", a.n_rejected},
    };
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

void write_sweeps_jsonl(const std::filesystem::path& path, std::span<const SweepResult> results) {
    auto os = open_out(path);
    for (const auto& s : results) os << to_json(s).dump() << '\n';
}

std::vector<SweepResult> read_sweep_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open sweep file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    std::vector<SweepResult> out;
    auto accept = [&](const nlohmann::json& j) {
        if (j.is_array()) {
            for (const auto& e : j) out.push_back(sweep_from_json(e));
        } else {
            out.push_back(sweep_from_json(j));
        }
    };
    try {
        accept(nlohmann::json::parse(text));
        return out;
    } catch (const nlohmann::json::parse_error&) {
        // Not a single document; try JSON Lines.
    }
    out.clear();
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            accept(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_curves_csv(const std::filesystem::path& path, std::span<const SweepResult> results) {
    auto os = open_out(path);
    os << "alpha";
    for (const auto& s : results) os << ',' << s.label;
    os << '\n';
    if (results.empty()) return;
    const auto& alphas = results.front().alphas;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        os << num(alphas[i]);
        for (const auto& s : results) os << ',' << (i < s.r.size() ? num(s.r[i]) : std::string());
        os << '\n';
    }
}

void write_aggregate_csv(const std::filesystem::path& path, const AggregateCurve& curve) {
    auto os = open_out(path);
    os << "alpha,median_r,q25_r,q75_r\n";
    for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
        os << num(curve.alphas[i]) << ',' << num(curve.median_r[i]) << ',' << num(curve.q25_r[i]) << ','
           << num(curve.q75_r[i]) << '\n';
    }
}

}  // namespace resprobe
