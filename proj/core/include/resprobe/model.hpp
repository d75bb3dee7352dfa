// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resprobe/tensor.hpp"
#include "resprobe/tokens.hpp"

namespace resprobe {

enum class NormKind {
    nonparametric_layernorm,  // OLMo: no learned scale or shift
    rmsnorm,                  // Qwen2 / Llama
    layernorm,                // GPT-2: learned scale and shift
};

enum class PositionalKind { rotary, learned };

enum class MlpKind {
    swiglu,  // down(silu(gate(x)) * up(x))
    gelu,    // down(gelu_tanh(up(x) + b) ) + b
};

std::string to_string(NormKind k);
std::string to_string(PositionalKind k);
std::string to_string(MlpKind k);

/// Architecture hyperparameters of a decoder-only transformer.
///
/// The first block of fields mirrors the usual published model cards
/// (hidden size, layers, heads, KV heads, intermediate size, normalization,
/// vocabulary, weight tying). The trailing fields cover what imported
/// checkpoints additionally need.
struct ModelConfig {
    std::size_t hidden_size = 0;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t n_kv_heads = 0;
    std::size_t intermediate_size = 0;
    std::size_t vocab_size = 0;
    NormKind norm_kind = NormKind::nonparametric_layernorm;
    bool weight_tying = true;
    std::size_t max_seq_len = 0;
    PositionalKind positional_kind = PositionalKind::rotary;

    MlpKind mlp_kind = MlpKind::swiglu;
    bool attn_bias = false;  // biases on q/k/v projections
    bool proj_bias = false;  // biases on attention output and MLP projections
    float rope_theta = 10000.0f;

    std::size_t head_dim() const { return hidden_size / n_heads; }
    std::size_t kv_dim() const { return head_dim() * n_kv_heads; }

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Canonical parameter names.
namespace param {
inline const std::string kEmbed = "embed.weight";
inline const std::string kPosEmbed = "pos_embed.weight";
inline const std::string kFinalNormWeight = "final_norm.weight";
inline const std::string kFinalNormBias = "final_norm.bias";
inline const std::string kLmHead = "lm_head.weight";
std::string layer(std::size_t l, const std::string& suffix);
}  // namespace param

/// Every parameter the config requires, with its exact shape, in canonical order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_parameters(
    const ModelConfig& config);

/// Named parameter tensors. With weight tying, the unembedding is the
/// embedding tensor and no separate `lm_head.weight` is stored.
class ModelWeights {
public:
    void set(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    /// Throws FormatError when `name` is absent.
    const Tensor& get(const std::string& name) const;
    Tensor& get_mut(const std::string& name);
    const std::map<std::string, Tensor>& tensors() const noexcept { return tensors_; }
    std::size_t parameter_count() const;

    /// [vocab x hidden] matrix whose rows score each token.
    const Tensor& unembedding(const ModelConfig& config) const;

    /// Throws FormatError listing missing, misshapen or unexpected tensors.
    void validate(const ModelConfig& config) const;

    friend bool operator==(const ModelWeights&, const ModelWeights&) = default;

private:
    std::map<std::string, Tensor> tensors_;
};

/// Residual stream after block `layer` completes, at the last sequence position.
struct HookPoint {
    std::size_t layer = 0;
};

/// Replace the residual at `hook` with `replacement` and finish the forward pass.
struct PatchSpec {
    HookPoint hook;
    Tensor replacement;
};

/// Last-position outputs of a forward pass.
struct ForwardOutput {
    Tensor final_resid;  // residual after the last block, before the final norm
    Tensor logits;       // [vocab_size]
};

class PatchSession;

/// Immutable model: config plus validated weights. Safe to share across
/// threads; every call owns its activation buffers.
class Model {
public:
    Model(ModelConfig config, ModelWeights weights);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelConfig& config() const noexcept { return config_; }
    const ModelWeights& weights() const noexcept { return weights_; }

    ForwardOutput forward(std::span<const TokenId> tokens) const;
    Tensor capture(std::span<const TokenId> tokens, HookPoint hook) const;
    /// Full recompute: layers through `patch.hook.layer` on the clean prompt,
    /// overwrite the last-position residual, then the remaining layers.
    ForwardOutput forward_patched(std::span<const TokenId> tokens, const PatchSpec& patch) const;

    /// Throws InputError when `layer` is out of range.
    HookPoint hook(std::size_t layer) const;

    std::uint64_t clean_forward_count() const noexcept { return counters_->clean.load(); }
    std::uint64_t patched_forward_count() const noexcept { return counters_->patched.load(); }

private:
    friend class PatchSession;

    struct Counters {
        std::atomic<std::uint64_t> clean{0};
        std::atomic<std::uint64_t> patched{0};
    };

    // Per-sequence scratch: residual rows and per-layer K/V caches.
    struct State {
        std::size_t seq_len = 0;
        std::vector<float> x;                    // [T x D]
        std::vector<std::vector<float>> keys;    // per layer [T x kv_dim], rotary applied
        std::vector<std::vector<float>> values;  // per layer [T x kv_dim]
    };

    void check_tokens(std::span<const TokenId> tokens) const;
    void check_patch(const PatchSpec& patch) const;
    State embed(std::span<const TokenId> tokens) const;
    /// Runs block `layer` on rows [first_row, seq_len). Rows before
    /// `first_row` must already hold valid keys/values for this layer.
    void run_block(std::size_t layer, State& s, std::size_t first_row) const;
    ForwardOutput finish(std::span<const float> last_resid) const;

    ModelConfig config_;
    ModelWeights weights_;
    std::vector<float> rope_cos_;  // [max_seq_len x head_dim/2]
    std::vector<float> rope_sin_;
    std::unique_ptr<Counters> counters_;
};

/// Cached clean run of one prompt, patched repeatedly at a fixed layer.
///
/// Only the last position changes under a patch, so the session keeps the
/// clean keys/values of every earlier position and recomputes just the last
/// row through the remaining blocks. Results are bit-identical to
/// Model::forward_patched.
class PatchSession {
public:
    PatchSession(const Model& model, std::span<const TokenId> tokens, HookPoint hook);

    const Tensor& captured() const noexcept { return captured_; }
    const ForwardOutput& clean() const noexcept { return clean_; }
    HookPoint hook() const noexcept { return hook_; }
    std::size_t seq_len() const noexcept { return state_.seq_len; }

    ForwardOutput run(std::span<const float> replacement) const;

private:
    const Model* model_;
    HookPoint hook_;
    Model::State state_;
    Tensor captured_;
    ForwardOutput clean_;
};

/// Argmax of `logits`; ties go to the lowest id.
TokenId top_prediction(std::span<const float> logits);

}  // namespace resprobe
