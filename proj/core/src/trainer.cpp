// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "resprobe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "resprobe/error.hpp"
#include "train_graph.hpp"

namespace resprobe {

double TrainConfig::lr_at(std::uint64_t step) const {
    if (step < warmup_steps) {
        return learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    }
    const std::uint64_t steps = total_steps();
    const std::uint64_t decay_steps = steps > warmup_steps ? steps - warmup_steps : 1;
    const double progress =
        std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps));
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return learning_rate * (min_lr_ratio + (1.0 - min_lr_ratio) * cosine);
}

void TrainConfig::validate() const {
    detail::TrainGraph<float>::check_supported(model);
    if (seq_len < 1 || seq_len > model.max_seq_len) throw ConfigError("seq_len must be in [1, max_seq_len]");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (total_tokens == 0 || total_tokens % tokens_per_step() != 0) {
        throw ConfigError("total_tokens must be a positive multiple of seq_len * batch_size (" +
                          std::to_string(tokens_per_step()) + ")");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (min_lr_ratio < 0.0 || min_lr_ratio > 1.0) throw ConfigError("min_lr_ratio must be in [0, 1]");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must be in (0, 1)");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
    std::uint64_t prev = 0;
    for (std::uint64_t mark : checkpoint_tokens) {
        if (mark <= prev) throw ConfigError("checkpoint_tokens must be strictly increasing and positive");
        if (mark % tokens_per_step() != 0) {
            throw ConfigError("checkpoint mark " + std::to_string(mark) + " is not a multiple of " +
                              std::to_string(tokens_per_step()));
        }
        prev = mark;
    }
    if (!checkpoint_tokens.empty() && checkpoint_tokens.back() != total_tokens) {
        throw ConfigError("the last checkpoint mark must equal total_tokens");
    }
}

std::vector<std::uint64_t> log_spaced_marks(std::uint64_t first, std::uint64_t total, std::size_t count,
                                            std::uint64_t granularity) {
    if (granularity == 0 || first == 0 || first > total || count == 0) {
        throw ConfigError("log_spaced_marks needs 0 < first <= total, count > 0, granularity > 0");
    }
    std::vector<std::uint64_t> marks;
    const double lo = std::log(static_cast<double>(first));
    const double hi = std::log(static_cast<double>(total));
    for (std::size_t i = 0; i < count; ++i) {
        const double frac = count == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        const double v = std::exp(lo + (hi - lo) * frac);
        auto m = static_cast<std::uint64_t>(std::llround(v / static_cast<double>(granularity))) * granularity;
        m = std::clamp<std::uint64_t>(m, granularity, total);
        if (i + 1 == count) m = total;
        if (marks.empty() || m > marks.back()) marks.push_back(m);
    }
    return marks;
}

TrainConfig train_preset(std::string_view name, std::size_t vocab_size) {
    TrainConfig t;
    ModelConfig& m = t.model;
    if (name == "tiny") {
        m.hidden_size = 64;
        m.n_layers = 4;
        m.n_heads = 4;
        m.n_kv_heads = 4;
        m.intermediate_size = 176;
    } else if (name == "micro") {
        m.hidden_size = 32;
        m.n_layers = 2;
        m.n_heads = 2;
        m.n_kv_heads = 2;
        m.intermediate_size = 88;
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "' (expected tiny or micro)");
    }
    m.vocab_size = vocab_size;
    m.norm_kind = NormKind::nonparametric_layernorm;
    m.positional_kind = PositionalKind::rotary;
    m.weight_tying = true;
    m.max_seq_len = 64;
    t.seq_len = 64;
    t.batch_size = 16;
    return t;
}

ModelWeights init_weights(const ModelConfig& config, double init_std, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(config.n_layers));
    ModelWeights w;
    for (const auto& [name, shape] : expected_parameters(config)) {
        Tensor t(shape);
        auto data = t.data();
        const bool gain = name.ends_with("norm.weight");
        const bool bias = name.ends_with(".bias");
        if (gain) {
            std::fill(data.begin(), data.end(), 1.0f);
        } else if (!bias) {
            double std = init_std;
            if (name.ends_with("attn.o.weight") || name.ends_with("mlp.down.weight")) std *= residual_scale;
            for (float& v : data) v = static_cast<float>(std * normal(rng));
        }
        w.set(name, std::move(t));
    }
    return w;
}

namespace {

struct AdamState {
    std::vector<float> m, v;
};

std::vector<std::vector<TokenId>> eval_windows(std::span<const TokenId> tail, std::size_t count, std::size_t window) {
    std::vector<std::vector<TokenId>> out;
    if (tail.size() < window) return out;
    const std::size_t room = tail.size() - window;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = count == 1 ? 0 : room * i / (count - 1);
        out.emplace_back(tail.begin() + static_cast<std::ptrdiff_t>(start),
                         tail.begin() + static_cast<std::ptrdiff_t>(start + window));
    }
    return out;
}

double eval_graph(detail::TrainGraph<float>& g, std::span<const std::vector<TokenId>> windows) {
    const std::size_t seq = g.seq_len(), b = g.batch();
    std::vector<TokenId> in(b * seq), tgt(b * seq);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + b <= windows.size(); start += b) {
        for (std::size_t i = 0; i < b; ++i) {
            const auto& w = windows[start + i];
            std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(seq), in.begin() + static_cast<std::ptrdiff_t>(i * seq));
            std::copy(w.begin() + 1, w.begin() + static_cast<std::ptrdiff_t>(seq + 1), tgt.begin() + static_cast<std::ptrdiff_t>(i * seq));
        }
        total += g.forward(in, tgt);
        ++batches;
    }
    return batches ? total / static_cast<double>(batches) : std::numeric_limits<double>::quiet_NaN();
}

void check_tokens(const ModelConfig& config, std::span<const TokenId> tokens) {
    for (TokenId t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size) {
            throw VocabError("token id " + std::to_string(t) + " outside vocabulary of " +
                             std::to_string(config.vocab_size));
        }
    }
}

}  // namespace

double evaluate_loss(const ModelConfig& config, const ModelWeights& weights,
                     std::span<const std::vector<TokenId>> windows) {
    if (windows.empty()) throw InputError("evaluate_loss needs at least one window");
    const std::size_t window = windows.front().size();
    if (window < 2) throw InputError("evaluation windows need at least 2 tokens");
    for (const auto& w : windows) {
        if (w.size() != window) throw InputError("evaluation windows differ in length");
        check_tokens(config, w);
    }
    weights.validate(config);
    detail::TrainGraph<float> g(config, 1, window - 1);
    g.load(weights);
    return eval_graph(g, windows);
}

std::vector<Checkpoint> train(const TrainConfig& config, std::span<const TokenId> corpus_tokens,
                              const TrainCallbacks& callbacks) {
    config.validate();
    check_tokens(config.model, corpus_tokens);
    const std::size_t window = config.seq_len + 1;
    const auto holdout = static_cast<std::size_t>(
        std::floor(static_cast<double>(corpus_tokens.size()) * config.holdout_fraction));
    const std::size_t head = corpus_tokens.size() - holdout;
    if (holdout < window || head < window) {
        throw CorpusError("corpus of " + std::to_string(corpus_tokens.size()) +
                          " tokens is too short for seq_len " + std::to_string(config.seq_len));
    }
    const auto head_tokens = corpus_tokens.first(head);
    const auto eval = eval_windows(corpus_tokens.subspan(head), config.eval_batches * config.batch_size, window);

    detail::TrainGraph<float> graph(config.model, config.batch_size, config.seq_len);
    graph.load(init_weights(config.model, config.init_std, config.seed));
    detail::TrainGraph<float> eval_graph_inst(config.model, config.batch_size, config.seq_len);

    std::vector<std::uint64_t> marks = config.checkpoint_tokens;
    if (marks.empty()) marks.push_back(config.total_tokens);

    std::vector<Checkpoint> kept;
    auto save = [&](std::uint64_t tokens_seen) {
        eval_graph_inst.params = graph.params;
        Checkpoint cp{graph.export_weights(), tokens_seen, eval_graph(eval_graph_inst, eval)};
        if (callbacks.on_checkpoint) callbacks.on_checkpoint(cp);
        if (callbacks.keep_checkpoints) kept.push_back(std::move(cp));
    };
    save(0);

    const std::size_t n_params = graph.params.size();
    AdamState adam{std::vector<float>(n_params, 0.0f), std::vector<float>(n_params, 0.0f)};
    std::vector<char> decay(n_params, 0);
    for (const auto& s : graph.slots()) {
        if (s.decay) std::fill(decay.begin() + static_cast<std::ptrdiff_t>(s.offset),
                               decay.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size), 1);
    }

    std::mt19937_64 rng(config.seed ^ 0x5eed5eed5eedULL);
    std::uniform_int_distribution<std::size_t> start_dist(0, head - window);
    std::vector<TokenId> in(config.batch_size * config.seq_len), tgt(in.size());
    std::size_t next_mark = 0;
    std::uint64_t tokens_seen = 0;
    double beta1_pow = 1.0, beta2_pow = 1.0;

    for (std::uint64_t step = 0; step < config.total_steps(); ++step) {
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const std::size_t start = start_dist(rng);
            for (std::size_t t = 0; t < config.seq_len; ++t) {
                in[b * config.seq_len + t] = head_tokens[start + t];
                tgt[b * config.seq_len + t] = head_tokens[start + t + 1];
            }
        }
        const double loss = graph.forward(in, tgt);
        if (!std::isfinite(loss)) {
            throw DivergenceError("training loss became non-finite at step " + std::to_string(step));
        }
        graph.backward();

        double norm_sq = 0.0;
        for (float g : graph.grads) norm_sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(norm_sq);
        if (!std::isfinite(norm)) {
            throw DivergenceError("gradient became non-finite at step " + std::to_string(step));
        }
        const double clip = config.grad_clip > 0.0 && norm > config.grad_clip ? config.grad_clip / norm : 1.0;

        const double lr = config.lr_at(step);
        beta1_pow *= config.beta1;
        beta2_pow *= config.beta2;
        const double bc1 = 1.0 - beta1_pow, bc2 = 1.0 - beta2_pow;
        const auto b1 = static_cast<float>(config.beta1), b2 = static_cast<float>(config.beta2);
        for (std::size_t i = 0; i < n_params; ++i) {
            const float g = static_cast<float>(graph.grads[i] * clip);
            adam.m[i] = b1 * adam.m[i] + (1.0f - b1) * g;
            adam.v[i] = b2 * adam.v[i] + (1.0f - b2) * g * g;
            const double mhat = adam.m[i] / bc1;
            const double vhat = adam.v[i] / bc2;
            double p = graph.params[i];
            if (decay[i]) p -= lr * config.weight_decay * p;
            p -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
            graph.params[i] = static_cast<float>(p);
        }

        tokens_seen += config.tokens_per_step();
        if (callbacks.on_step) callbacks.on_step(TrainLogRow{step, tokens_seen, loss, lr});
        if (next_mark < marks.size() && tokens_seen == marks[next_mark]) {
            save(tokens_seen);
            ++next_mark;
        }
    }
    return kept;
}

}  // namespace resprobe
