// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "resprobe/error.hpp"

namespace resprobe {

namespace {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
             const char* what) {
    for (const auto& [name, value] : table) {
        if (s == name) return value;
    }
    throw ConfigError(std::string("unknown ") + what + ": '" + s + "'");
}

float gelu_tanh(float x) {
    constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
    return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

float silu(float x) {
    return x / (1.0f + std::exp(-x));
}

void add_bias_rows(std::span<float> x, std::span<const float> bias, std::size_t rows) {
    const std::size_t n = bias.size();
    for (std::size_t r = 0; r < rows; ++r) {
        float* xr = x.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) xr[j] += bias[j];
    }
}

}  // namespace

std::string to_string(NormKind k) {
    switch (k) {
        case NormKind::nonparametric_layernorm: return "nonparametric_layernorm";
        case NormKind::rmsnorm: return "rmsnorm";
        case NormKind::layernorm: return "layernorm";
    }
    return "?";
}

std::string to_string(PositionalKind k) {
    return k == PositionalKind::rotary ? "rotary" : "learned";
}

std::string to_string(MlpKind k) {
    return k == MlpKind::swiglu ? "swiglu" : "gelu";
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(hidden_size, "hidden_size");
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(n_kv_heads, "n_kv_heads");
    positive(intermediate_size, "intermediate_size");
    positive(max_seq_len, "max_seq_len");
    if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
    if (hidden_size % n_heads != 0) throw ConfigError("hidden_size must be divisible by n_heads");
    if (n_heads % n_kv_heads != 0) throw ConfigError("n_heads must be divisible by n_kv_heads");
    if (positional_kind == PositionalKind::rotary && head_dim() % 2 != 0) {
        throw ConfigError("rotary embeddings need an even head dimension");
    }
    if (!(rope_theta > 0.0f)) throw ConfigError("rope_theta must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{
        {"hidden_size", c.hidden_size},
        {"n_layers", c.n_layers},
        {"n_heads", c.n_heads},
        {"n_kv_heads", c.n_kv_heads},
        {"intermediate_size", c.intermediate_size},
        {"vocab_size", c.vocab_size},
        {"norm_kind", to_string(c.norm_kind)},
        {"weight_tying", c.weight_tying},
        {"max_seq_len", c.max_seq_len},
        {"positional_kind", to_string(c.positional_kind)},
        {"mlp_kind", to_string(c.mlp_kind)},
        {"attn_bias", c.attn_bias},
        {"proj_bias", c.proj_bias},
        {"rope_theta", c.rope_theta},
    };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    try {
        c.hidden_size = j.at("hidden_size").get<std::size_t>();
        c.n_layers = j.at("n_layers").get<std::size_t>();
        c.n_heads = j.at("n_heads").get<std::size_t>();
        c.n_kv_heads = j.value("n_kv_heads", c.n_heads);
        c.intermediate_size = j.at("intermediate_size").get<std::size_t>();
        c.vocab_size = j.at("vocab_size").get<std::size_t>();
        c.norm_kind = parse_enum<NormKind>(j.at("norm_kind").get<std::string>(),
                                           {{"nonparametric_layernorm", NormKind::nonparametric_layernorm},
                                            {"rmsnorm", NormKind::rmsnorm},
                                            {"layernorm", NormKind::layernorm}},
                                           "norm_kind");
        c.weight_tying = j.at("weight_tying").get<bool>();
        c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
        c.positional_kind = parse_enum<PositionalKind>(
            j.value("positional_kind", std::string("rotary")),
            {{"rotary", PositionalKind::rotary}, {"learned", PositionalKind::learned}},
            "positional_kind");
        c.mlp_kind = parse_enum<MlpKind>(j.value("mlp_kind", std::string("swiglu")),
                                         {{"swiglu", MlpKind::swiglu}, {"gelu", MlpKind::gelu}},
                                         "mlp_kind");
        c.attn_bias = j.value("attn_bias", false);
        c.proj_bias = j.value("proj_bias", false);
        c.rope_theta = j.value("rope_theta", 10000.0f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model config: ") + e.what());
    }
}

std::string param::layer(std::size_t l, const std::string& suffix) {
    return "layers." + std::to_string(l) + "." + suffix;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_parameters(
    const ModelConfig& c) {
    const std::size_t d = c.hidden_size, i = c.intermediate_size, kv = c.kv_dim();
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    out.emplace_back(param::kEmbed, std::vector<std::size_t>{c.vocab_size, d});
    if (c.positional_kind == PositionalKind::learned) {
        out.emplace_back(param::kPosEmbed, std::vector<std::size_t>{c.max_seq_len, d});
    }
    auto norm = [&](const std::string& prefix) {
        if (c.norm_kind != NormKind::nonparametric_layernorm) out.emplace_back(prefix + ".weight", std::vector<std::size_t>{d});
        if (c.norm_kind == NormKind::layernorm) out.emplace_back(prefix + ".bias", std::vector<std::size_t>{d});
    };
    auto linear = [&](const std::string& name, std::size_t in, std::size_t outd, bool bias) {
        out.emplace_back(name + ".weight", std::vector<std::size_t>{in, outd});
        if (bias) out.emplace_back(name + ".bias", std::vector<std::size_t>{outd});
    };
    for (std::size_t l = 0; l < c.n_layers; ++l) {
        norm(param::layer(l, "attn_norm"));
        linear(param::layer(l, "attn.q"), d, d, c.attn_bias);
        linear(param::layer(l, "attn.k"), d, kv, c.attn_bias);
        linear(param::layer(l, "attn.v"), d, kv, c.attn_bias);
        linear(param::layer(l, "attn.o"), d, d, c.proj_bias);
        norm(param::layer(l, "mlp_norm"));
        if (c.mlp_kind == MlpKind::swiglu) linear(param::layer(l, "mlp.gate"), d, i, c.proj_bias);
        linear(param::layer(l, "mlp.up"), d, i, c.proj_bias);
        linear(param::layer(l, "mlp.down"), i, d, c.proj_bias);
    }
    norm("final_norm");
    if (!c.weight_tying) out.emplace_back(param::kLmHead, std::vector<std::size_t>{c.vocab_size, d});
    return out;
}

const Tensor& ModelWeights::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw FormatError("missing parameter '" + name + "'");
    return it->second;
}

Tensor& ModelWeights::get_mut(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw FormatError("missing parameter '" + name + "'");
    return it->second;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
}

const Tensor& ModelWeights::unembedding(const ModelConfig& config) const {
    return get(config.weight_tying ? param::kEmbed : param::kLmHead);
}

void ModelWeights::validate(const ModelConfig& config) const {
    std::string problems;
    std::set<std::string> expected;
    for (const auto& [name, shape] : expected_parameters(config)) {
        expected.insert(name);
        auto it = tensors_.find(name);
        if (it == tensors_.end()) {
            problems += "\n  missing " + name + " " + shape_string(shape);
        } else if (it->second.shape() != shape) {
            problems += "\n  " + name + " has shape " + it->second.shape_string() + ", expected " +
                        shape_string(shape);
        }
    }
    for (const auto& [name, _] : tensors_) {
        if (!expected.count(name)) problems += "\n  unexpected " + name;
    }
    if (!problems.empty()) throw FormatError("weights do not match config:" + problems);
}

Model::Model(ModelConfig config, ModelWeights weights)
    : config_(std::move(config)), weights_(std::move(weights)), counters_(std::make_unique<Counters>()) {
    config_.validate();
    weights_.validate(config_);
    if (config_.positional_kind == PositionalKind::rotary) {
        const std::size_t half = config_.head_dim() / 2;
        rope_cos_.resize(config_.max_seq_len * half);
        rope_sin_.resize(config_.max_seq_len * half);
        for (std::size_t pos = 0; pos < config_.max_seq_len; ++pos) {
            for (std::size_t i = 0; i < half; ++i) {
                const double inv_freq =
                    std::pow(static_cast<double>(config_.rope_theta),
                             -2.0 * static_cast<double>(i) / static_cast<double>(config_.head_dim()));
                const double angle = static_cast<double>(pos) * inv_freq;
                rope_cos_[pos * half + i] = static_cast<float>(std::cos(angle));
                rope_sin_[pos * half + i] = static_cast<float>(std::sin(angle));
            }
        }
    }
}

HookPoint Model::hook(std::size_t layer) const {
    if (layer >= config_.n_layers) {
        throw InputError("layer " + std::to_string(layer) + " out of range [0, " +
                         std::to_string(config_.n_layers - 1) + "]");
    }
    return HookPoint{layer};
}

void Model::check_tokens(std::span<const TokenId> tokens) const {
    if (tokens.empty()) throw InputError("empty token sequence");
    if (tokens.size() > config_.max_seq_len) {
        throw InputError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_seq_len " +
                         std::to_string(config_.max_seq_len));
    }
    for (TokenId t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
            throw VocabError("token id " + std::to_string(t) + " outside vocabulary of " +
                             std::to_string(config_.vocab_size));
        }
    }
}

void Model::check_patch(const PatchSpec& patch) const {
    hook(patch.hook.layer);
    if (patch.replacement.size() != config_.hidden_size) {
        throw DimensionError("patch replacement has " + std::to_string(patch.replacement.size()) +
                             " elements, hidden_size is " + std::to_string(config_.hidden_size));
    }
}

Model::State Model::embed(std::span<const TokenId> tokens) const {
    const std::size_t d = config_.hidden_size, t_len = tokens.size();
    State s;
    s.seq_len = t_len;
    s.x.resize(t_len * d);
    const Tensor& emb = weights_.get(param::kEmbed);
    for (std::size_t t = 0; t < t_len; ++t) {
        auto row = emb.row(static_cast<std::size_t>(tokens[t]));
        std::copy(row.begin(), row.end(), s.x.begin() + static_cast<std::ptrdiff_t>(t * d));
    }
    if (config_.positional_kind == PositionalKind::learned) {
        const Tensor& pos = weights_.get(param::kPosEmbed);
        for (std::size_t t = 0; t < t_len; ++t) {
            auto row = pos.row(t);
            for (std::size_t i = 0; i < d; ++i) s.x[t * d + i] += row[i];
        }
    }
    s.keys.assign(config_.n_layers, std::vector<float>(t_len * config_.kv_dim()));
    s.values.assign(config_.n_layers, std::vector<float>(t_len * config_.kv_dim()));
    return s;
}

namespace {

void apply_norm(const ModelConfig& c, const ModelWeights& w, const std::string& prefix,
                std::span<const float> x, std::span<float> out) {
    const std::size_t d = c.hidden_size;
    switch (c.norm_kind) {
        case NormKind::nonparametric_layernorm:
            layer_norm_rows(x, out, d);
            break;
        case NormKind::rmsnorm:
            rms_norm_rows(x, w.get(prefix + ".weight").data(), out, d);
            break;
        case NormKind::layernorm: {
            layer_norm_rows(x, out, d);
            auto g = w.get(prefix + ".weight").data();
            auto b = w.get(prefix + ".bias").data();
            for (std::size_t r = 0; r < x.size() / d; ++r) {
                for (std::size_t i = 0; i < d; ++i) out[r * d + i] = out[r * d + i] * g[i] + b[i];
            }
            break;
        }
    }
}

void linear(const ModelWeights& w, const std::string& name, bool bias, std::span<const float> x,
            std::span<float> out, std::size_t rows) {
    const Tensor& weight = w.get(name + ".weight");
    gemm(x, weight.data(), out, rows, weight.dim(0), weight.dim(1));
    if (bias) add_bias_rows(out, w.get(name + ".bias").data(), rows);
}

}  // namespace

void Model::run_block(std::size_t l, State& s, std::size_t first_row) const {
    const ModelConfig& c = config_;
    const std::size_t d = c.hidden_size, hd = c.head_dim(), kvd = c.kv_dim();
    const std::size_t rows = s.seq_len - first_row;
    const std::size_t group = c.n_heads / c.n_kv_heads;
    std::span<float> x = std::span<float>(s.x).subspan(first_row * d, rows * d);

    std::vector<float> h(rows * d);
    apply_norm(c, weights_, param::layer(l, "attn_norm"), x, h);

    std::vector<float> q(rows * d);
    linear(weights_, param::layer(l, "attn.q"), c.attn_bias, h, q, rows);
    std::span<float> k = std::span<float>(s.keys[l]).subspan(first_row * kvd, rows * kvd);
    std::span<float> v = std::span<float>(s.values[l]).subspan(first_row * kvd, rows * kvd);
    linear(weights_, param::layer(l, "attn.k"), c.attn_bias, h, k, rows);
    linear(weights_, param::layer(l, "attn.v"), c.attn_bias, h, v, rows);

    if (c.positional_kind == PositionalKind::rotary) {
        const std::size_t half = hd / 2;
        auto rotate = [&](float* vec, std::size_t pos) {
            const float* cs = rope_cos_.data() + pos * half;
            const float* sn = rope_sin_.data() + pos * half;
            for (std::size_t i = 0; i < half; ++i) {
                const float x1 = vec[i], x2 = vec[i + half];
                vec[i] = x1 * cs[i] - x2 * sn[i];
                vec[i + half] = x1 * sn[i] + x2 * cs[i];
            }
        };
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t pos = first_row + r;
            for (std::size_t head = 0; head < c.n_heads; ++head) rotate(q.data() + r * d + head * hd, pos);
            for (std::size_t head = 0; head < c.n_kv_heads; ++head) rotate(k.data() + r * kvd + head * hd, pos);
        }
    }

    // Causal attention; each query row attends to keys 0..pos in ascending order.
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    std::vector<float> attn(rows * d, 0.0f);
    std::vector<float> scores(s.seq_len);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t pos = first_row + r;
        for (std::size_t head = 0; head < c.n_heads; ++head) {
            const std::size_t kv_head = head / group;
            const float* qh = q.data() + r * d + head * hd;
            std::span<float> sc(scores.data(), pos + 1);
            for (std::size_t t = 0; t <= pos; ++t) {
                const float* kt = s.keys[l].data() + t * kvd + kv_head * hd;
                float acc = 0.0f;
                for (std::size_t i = 0; i < hd; ++i) acc += qh[i] * kt[i];
                sc[t] = acc * scale;
            }
            softmax_inplace(sc);
            float* out = attn.data() + r * d + head * hd;
            for (std::size_t t = 0; t <= pos; ++t) {
                const float* vt = s.values[l].data() + t * kvd + kv_head * hd;
                const float p = sc[t];
                for (std::size_t i = 0; i < hd; ++i) out[i] += p * vt[i];
            }
        }
    }
    std::vector<float> proj(rows * d);
    linear(weights_, param::layer(l, "attn.o"), c.proj_bias, attn, proj, rows);
    for (std::size_t i = 0; i < rows * d; ++i) x[i] += proj[i];

    apply_norm(c, weights_, param::layer(l, "mlp_norm"), x, h);
    const std::size_t inter = c.intermediate_size;
    std::vector<float> up(rows * inter);
    linear(weights_, param::layer(l, "mlp.up"), c.proj_bias, h, up, rows);
    if (c.mlp_kind == MlpKind::swiglu) {
        std::vector<float> gate(rows * inter);
        linear(weights_, param::layer(l, "mlp.gate"), c.proj_bias, h, gate, rows);
        for (std::size_t i = 0; i < up.size(); ++i) up[i] *= silu(gate[i]);
    } else {
        for (float& u : up) u = gelu_tanh(u);
    }
    linear(weights_, param::layer(l, "mlp.down"), c.proj_bias, up, proj, rows);
    for (std::size_t i = 0; i < rows * d; ++i) x[i] += proj[i];
}

ForwardOutput Model::finish(std::span<const float> last_resid) const {
    const std::size_t d = config_.hidden_size;
    ForwardOutput out;
    out.final_resid = Tensor({d}, std::vector<float>(last_resid.begin(), last_resid.end()));
    std::vector<float> h(d);
    apply_norm(config_, weights_, "final_norm", last_resid, h);
    const Tensor& unemb = weights_.unembedding(config_);
    std::vector<float> logits(config_.vocab_size);
    for (std::size_t v = 0; v < config_.vocab_size; ++v) {
        const float* row = unemb.data().data() + v * d;
        float acc = 0.0f;
        for (std::size_t i = 0; i < d; ++i) acc += h[i] * row[i];
        logits[v] = acc;
    }
    out.logits = Tensor({config_.vocab_size}, std::move(logits));
    return out;
}

ForwardOutput Model::forward(std::span<const TokenId> tokens) const {
    check_tokens(tokens);
    counters_->clean.fetch_add(1, std::memory_order_relaxed);
    State s = embed(tokens);
    for (std::size_t l = 0; l < config_.n_layers; ++l) run_block(l, s, 0);
    const std::size_t d = config_.hidden_size;
    return finish(std::span<const float>(s.x).subspan((s.seq_len - 1) * d, d));
}

Tensor Model::capture(std::span<const TokenId> tokens, HookPoint hook_point) const {
    check_tokens(tokens);
    hook(hook_point.layer);
    counters_->clean.fetch_add(1, std::memory_order_relaxed);
    State s = embed(tokens);
    for (std::size_t l = 0; l <= hook_point.layer; ++l) run_block(l, s, 0);
    const std::size_t d = config_.hidden_size;
    auto row = std::span<const float>(s.x).subspan((s.seq_len - 1) * d, d);
    return Tensor({d}, std::vector<float>(row.begin(), row.end()));
}

ForwardOutput Model::forward_patched(std::span<const TokenId> tokens, const PatchSpec& patch) const {
    check_tokens(tokens);
    check_patch(patch);
    counters_->patched.fetch_add(1, std::memory_order_relaxed);
    State s = embed(tokens);
    const std::size_t d = config_.hidden_size;
    for (std::size_t l = 0; l <= patch.hook.layer; ++l) run_block(l, s, 0);
    std::copy(patch.replacement.data().begin(), patch.replacement.data().end(),
              s.x.begin() + static_cast<std::ptrdiff_t>((s.seq_len - 1) * d));
    for (std::size_t l = patch.hook.layer + 1; l < config_.n_layers; ++l) run_block(l, s, 0);
    return finish(std::span<const float>(s.x).subspan((s.seq_len - 1) * d, d));
}

TokenId top_prediction(std::span<const float> logits) {
    if (logits.empty()) throw InputError("top_prediction on empty logits");
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return static_cast<TokenId>(best);
}

}  // namespace resprobe
