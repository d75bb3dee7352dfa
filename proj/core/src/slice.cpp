// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/slice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "resprobe/error.hpp"
#include "resprobe/parallel.hpp"
#include "resprobe/stats.hpp"

namespace resprobe {

void SliceSpec::validate() const {
    if (n_alpha < 2 || n_beta < 2) throw InputError("slice grid needs at least 2x2 points");
    if (!(alpha_range.hi > alpha_range.lo) || !(beta_range.hi > beta_range.lo)) {
        throw InputError("slice ranges must be non-degenerate (lo < hi)");
    }
    for (const auto& p : prompts) {
        if (p.empty()) throw InputError("slice prompts must be non-empty");
    }
}

SliceGeometry SliceGeometry::from(const Tensor& a, const Tensor& b, const Tensor& c) {
    if (a.shape() != b.shape() || a.shape() != c.shape()) throw DimensionError("slice activations differ in shape");
    SliceGeometry g;
    g.a = a;
    g.b = b;
    g.c = c;
    try {
        g.t = projection_coefficient(c.data(), a.data(), b.data());
    } catch (const DegenerateLineError& e) {
        throw DegenerateSliceError(std::string("slice is degenerate: ") + e.what());
    }
    const std::size_t n = a.size();
    g.offset.resize(n);
    double off_sq = 0.0, dir_sq = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dir = static_cast<double>(b[i]) - a[i];
        const double p = a[i] + g.t * dir;
        g.offset[i] = c[i] - p;
        off_sq += g.offset[i] * g.offset[i];
        dir_sq += dir * dir;
        cross += g.offset[i] * dir;
    }
    const double off_norm = std::sqrt(off_sq), dir_norm = std::sqrt(dir_sq);
    if (off_norm < 1e-8 || off_norm <= 1e-6 * dir_norm) {
        throw DegenerateSliceError("slice is degenerate: C lies on the line through A and B");
    }
    g.orthogonality_residual = std::abs(cross) / (off_norm * dir_norm);
    return g;
}

void SliceGeometry::point(double alpha, double beta, std::span<float> out) const {
    const double keep = 1.0 - alpha;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(keep * a[i] + alpha * b[i] + beta * offset[i]);
    }
}

Tensor synth_activation(const Tensor& a, const Tensor& b, const Tensor& c, double alpha, double beta) {
    const SliceGeometry g = SliceGeometry::from(a, b, c);
    Tensor x(a.shape());
    g.point(alpha, beta, x.data());
    return x;
}

std::pair<std::size_t, std::size_t> SliceImage::nearest_pixel(double alpha, double beta) const {
    auto nearest = [](const std::vector<double>& grid, double v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (std::abs(grid[i] - v) < std::abs(grid[best] - v)) best = i;
        }
        return best;
    };
    return {nearest(betas, beta), nearest(alphas, alpha)};
}

namespace {

// lo + (hi - lo) * k / (n - 1), exact at both ends.
std::vector<double> grid_values(Range r, std::size_t n) {
    std::vector<double> v(n);
    const double span = r.hi - r.lo;
    for (std::size_t k = 0; k < n; ++k) {
        v[k] = k + 1 == n ? r.hi : r.lo + span * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return v;
}

}  // namespace

void normalize_slice(SliceImage& image) {
    const std::size_t n = image.raw.size();
    image.normalized.assign(n, Rgb{});
    image.rgb.assign(n, Rgb{});
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double mx = 0.0;
        for (const auto& px : image.raw) mx = std::max(mx, px[ch]);
        image.channel_max[ch] = mx;
        image.zero_channel[ch] = !(mx > 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = image.zero_channel[ch] ? 0.0 : image.raw[i][ch] / mx;
            image.normalized[i][ch] = v;
            image.rgb[i][ch] = 1.0 - v;
        }
    }
}

SliceImage render_slice(const Model& model, const SliceSpec& spec, std::size_t threads) {
    spec.validate();
    const HookPoint hook = model.hook(spec.layer);
    const PatchSession session_a(model, spec.prompts[0].ids, hook);
    const PatchSession session_b(model, spec.prompts[1].ids, hook);
    const PatchSession session_c(model, spec.prompts[2].ids, hook);
    const SliceGeometry geom =
        SliceGeometry::from(session_a.captured(), session_b.captured(), session_c.captured());

    SliceImage image;
    image.width = spec.n_alpha;
    image.height = spec.n_beta;
    image.alphas = grid_values(spec.alpha_range, spec.n_alpha);
    image.betas = grid_values(spec.beta_range, spec.n_beta);
    std::reverse(image.betas.begin(), image.betas.end());
    image.projection_t = geom.t;
    image.orthogonality_residual = geom.orthogonality_residual;
    image.layer = spec.layer;
    for (std::size_t i = 0; i < 3; ++i) image.prompts[i] = spec.prompts[i].ids;
    image.alpha_range = spec.alpha_range;
    image.beta_range = spec.beta_range;
    image.raw.assign(image.width * image.height, Rgb{});

    const std::array<const PatchSession*, 3> sessions = {&session_a, &session_b, &session_c};
    const std::size_t dim = model.config().hidden_size;
    parallel_for(image.raw.size(), threads, [&](std::size_t idx) {
        const std::size_t row = idx / image.width, col = idx % image.width;
        std::vector<float> x(dim);
        geom.point(image.alphas[col], image.betas[row], x);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const ForwardOutput out = sessions[ch]->run(x);
            image.raw[idx][ch] =
                static_cast<double>(l2_distance(sessions[ch]->clean().final_resid.data(), out.final_resid.data()));
        }
    });
    normalize_slice(image);
    return image;
}

std::string encode_ppm(const SliceImage& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.reserve(out.size() + image.rgb.size() * 3);
    for (const auto& px : image.rgb) {
        for (double v : px) {
            const long byte = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
            out.push_back(static_cast<char>(static_cast<unsigned char>(byte)));
        }
    }
    return out;
}

void write_ppm(const SliceImage& image, const std::filesystem::path& path) {
    if (image.rgb.size() != image.width * image.height) throw InputError("slice image is not fully rendered");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    const std::string bytes = encode_ppm(image);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw InputError("write failed: " + path.string());
}

nlohmann::json slice_sidecar(const SliceImage& image) {
    nlohmann::json j;
    j["width"] = image.width;
    j["height"] = image.height;
    j["layer"] = image.layer;
    j["alpha_range"] = {image.alpha_range.lo, image.alpha_range.hi};
    j["beta_range"] = {image.beta_range.lo, image.beta_range.hi};
    j["alphas"] = image.alphas;
    j["betas"] = image.betas;
    j["prompts"] = {image.prompts[0], image.prompts[1], image.prompts[2]};
    j["checkpoint_tokens"] = image.checkpoint_tokens ? nlohmann::json(*image.checkpoint_tokens) : nlohmann::json();
    j["projection_t"] = image.projection_t;
    j["orthogonality_residual"] = image.orthogonality_residual;
    j["channel_max"] = image.channel_max;
    j["zero_channel"] = image.zero_channel;
    std::array<std::vector<double>, 3> channels;
    for (const auto& px : image.raw) {
        for (std::size_t ch = 0; ch < 3; ++ch) channels[ch].push_back(px[ch]);
    }
    j["d_A"] = channels[0];
    j["d_B"] = channels[1];
    j["d_C"] = channels[2];
    return j;
}

std::vector<double> neighbor_differences(const SliceImage& image) {
    std::vector<double> diffs;
    auto push = [&](std::size_t i, std::size_t k) {
        for (std::size_t ch = 0; ch < 3; ++ch) diffs.push_back(std::abs(image.rgb[i][ch] - image.rgb[k][ch]));
    };
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            if (c + 1 < image.width) push(image.index(r, c), image.index(r, c + 1));
            if (r + 1 < image.height) push(image.index(r, c), image.index(r + 1, c));
        }
    }
    return diffs;
}

double slice_sharpness(const SliceImage& image, double q) {
    const auto diffs = neighbor_differences(image);
    return quantile(diffs, q);
}

}  // namespace resprobe
