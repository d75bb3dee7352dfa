// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

// Batched forward/backward for the trainable architecture subset. Templated
// on the scalar so the gradient check can run the same graph in double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "resprobe/error.hpp"
#include "resprobe/model.hpp"

namespace resprobe::detail {

// C[m x n] (+)= A[m x k] B[k x n]
template <typename S>
void mm_nn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        S* __restrict ci = c + i * n;
        if (!accumulate) std::fill(ci, ci + n, S(0));
        const S* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const S av = ai[p];
            const S* __restrict bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m x n] += A[k x m]^T B[k x n]
template <typename S>
void mm_tn_acc(const S* a, const S* b, S* c, std::size_t k, std::size_t m, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const S* ap = a + p * m;
        const S* __restrict bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const S av = ap[i];
            if (av == S(0)) continue;
            S* __restrict ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m x n] (+)= A[m x k] B[n x k]^T, via an explicit transpose of B.
template <typename S>
void mm_nt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate,
           std::vector<S>& scratch) {
    scratch.resize(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) scratch[p * n + j] = b[j * k + p];
    }
    mm_nn(a, scratch.data(), c, m, k, n, accumulate);
}

template <typename S>
class TrainGraph {
public:
    struct Slot {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset = 0;
        std::size_t size = 0;
        bool decay = false;  // matrices get weight decay, gains do not
    };

    TrainGraph(const ModelConfig& config, std::size_t batch, std::size_t seq_len)
        : c_(config), batch_(batch), seq_(seq_len) {
        check_supported(config);
        if (seq_len > config.max_seq_len) throw ConfigError("training seq_len exceeds max_seq_len");
        std::size_t offset = 0;
        for (auto& [name, shape] : expected_parameters(config)) {
            Slot s;
            s.name = name;
            s.size = shape_product(shape);
            s.decay = shape.size() == 2 && name != param::kPosEmbed;
            s.shape = std::move(shape);
            s.offset = offset;
            offset += s.size;
            slots_.push_back(std::move(s));
        }
        params.assign(offset, S(0));
        grads.assign(offset, S(0));
        const std::size_t d = c_.hidden_size;
        const std::size_t n = batch_ * seq_;
        layers_.resize(c_.n_layers);
        for (std::size_t l = 0; l < c_.n_layers; ++l) {
            LayerSlots& ls = layers_[l];
            ls.attn_norm = find_opt(param::layer(l, "attn_norm.weight"));
            ls.q = find(param::layer(l, "attn.q.weight"));
            ls.k = find(param::layer(l, "attn.k.weight"));
            ls.v = find(param::layer(l, "attn.v.weight"));
            ls.o = find(param::layer(l, "attn.o.weight"));
            ls.mlp_norm = find_opt(param::layer(l, "mlp_norm.weight"));
            ls.gate = find(param::layer(l, "mlp.gate.weight"));
            ls.up = find(param::layer(l, "mlp.up.weight"));
            ls.down = find(param::layer(l, "mlp.down.weight"));

            LayerCache& lc = cache_.emplace_back();
            lc.n1 = NormCache(n, d);
            lc.n2 = NormCache(n, d);
            lc.q.resize(n * d);
            lc.k.resize(n * c_.kv_dim());
            lc.v.resize(n * c_.kv_dim());
            lc.att.resize(batch_ * c_.n_heads * seq_ * seq_);
            lc.ao.resize(n * d);
            lc.gate.resize(n * c_.intermediate_size);
            lc.up.resize(n * c_.intermediate_size);
            lc.act.resize(n * c_.intermediate_size);
        }
        embed_ = find(param::kEmbed);
        pos_ = find_opt(param::kPosEmbed);
        final_norm_ = find_opt(param::kFinalNormWeight);
        lm_head_ = c_.weight_tying ? embed_ : find(param::kLmHead);
        final_ = NormCache(n, d);
        x_.resize(n * d);
        probs_.resize(n * c_.vocab_size);

        if (c_.positional_kind == PositionalKind::rotary) {
            const std::size_t half = c_.head_dim() / 2;
            rope_cos_.resize(seq_ * half);
            rope_sin_.resize(seq_ * half);
            for (std::size_t pos = 0; pos < seq_; ++pos) {
                for (std::size_t i = 0; i < half; ++i) {
                    const double inv_freq = std::pow(static_cast<double>(c_.rope_theta),
                                                     -2.0 * static_cast<double>(i) / static_cast<double>(c_.head_dim()));
                    const double angle = static_cast<double>(pos) * inv_freq;
                    // Rounded through float so the f32 graph matches Model exactly.
                    rope_cos_[pos * half + i] = static_cast<S>(static_cast<float>(std::cos(angle)));
                    rope_sin_[pos * half + i] = static_cast<S>(static_cast<float>(std::sin(angle)));
                }
            }
        }
    }

    static void check_supported(const ModelConfig& c) {
        c.validate();
        if (c.norm_kind == NormKind::layernorm) throw ConfigError("trainer supports nonparametric_layernorm or rmsnorm");
        if (c.mlp_kind != MlpKind::swiglu) throw ConfigError("trainer supports the swiglu MLP only");
        if (c.attn_bias || c.proj_bias) throw ConfigError("trainer does not support linear biases");
    }

    const std::vector<Slot>& slots() const { return slots_; }
    std::size_t batch() const { return batch_; }
    std::size_t seq_len() const { return seq_; }

    const Slot& slot(const std::string& name) const { return slots_[find(name)]; }

    void load(const ModelWeights& w) {
        for (const Slot& s : slots_) {
            auto src = w.get(s.name).data();
            for (std::size_t i = 0; i < s.size; ++i) params[s.offset + i] = static_cast<S>(src[i]);
        }
    }

    ModelWeights export_weights() const {
        ModelWeights w;
        for (const Slot& s : slots_) {
            std::vector<float> data(s.size);
            for (std::size_t i = 0; i < s.size; ++i) data[i] = static_cast<float>(params[s.offset + i]);
            w.set(s.name, Tensor(s.shape, std::move(data)));
        }
        return w;
    }

    /// Mean cross-entropy over batch*seq positions; caches activations.
    /// `inputs` and `targets` are [batch x seq] row-major.
    double forward(std::span<const TokenId> inputs, std::span<const TokenId> targets) {
        const std::size_t d = c_.hidden_size, n = batch_ * seq_, v = c_.vocab_size;
        inputs_.assign(inputs.begin(), inputs.end());
        targets_.assign(targets.begin(), targets.end());
        for (std::size_t r = 0; r < n; ++r) {
            const S* e = P(embed_) + static_cast<std::size_t>(inputs[r]) * d;
            std::copy(e, e + d, x_.data() + r * d);
            if (pos_ >= 0) {
                const S* pe = P(pos_) + (r % seq_) * d;
                for (std::size_t i = 0; i < d; ++i) x_[r * d + i] += pe[i];
            }
        }
        std::vector<S> h(n * d), proj(n * d);
        for (std::size_t l = 0; l < c_.n_layers; ++l) {
            const LayerSlots& ls = layers_[l];
            LayerCache& lc = cache_[l];
            norm_forward(x_.data(), lc.n1, ls.attn_norm, h.data());
            lc.h1 = h;
            mm_nn(h.data(), P(ls.q), lc.q.data(), n, d, d, false);
            mm_nn(h.data(), P(ls.k), lc.k.data(), n, d, c_.kv_dim(), false);
            mm_nn(h.data(), P(ls.v), lc.v.data(), n, d, c_.kv_dim(), false);
            if (c_.positional_kind == PositionalKind::rotary) {
                rope(lc.q.data(), c_.n_heads, false);
                rope(lc.k.data(), c_.n_kv_heads, false);
            }
            attention_forward(lc);
            mm_nn(lc.ao.data(), P(ls.o), proj.data(), n, d, d, false);
            for (std::size_t i = 0; i < n * d; ++i) x_[i] += proj[i];

            norm_forward(x_.data(), lc.n2, ls.mlp_norm, h.data());
            lc.h2 = h;
            const std::size_t inter = c_.intermediate_size;
            mm_nn(h.data(), P(ls.gate), lc.gate.data(), n, d, inter, false);
            mm_nn(h.data(), P(ls.up), lc.up.data(), n, d, inter, false);
            for (std::size_t i = 0; i < n * inter; ++i) {
                const S g = lc.gate[i];
                lc.act[i] = g / (S(1) + std::exp(-g)) * lc.up[i];
            }
            mm_nn(lc.act.data(), P(ls.down), proj.data(), n, inter, d, false);
            for (std::size_t i = 0; i < n * d; ++i) x_[i] += proj[i];
        }
        hf_.resize(n * d);
        norm_forward(x_.data(), final_, final_norm_, hf_.data());
        // logits = hf @ lm_head^T
        mm_nt(hf_.data(), P(lm_head_), probs_.data(), n, d, v, false, scratch_);
        double loss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            S* row = probs_.data() + r * v;
            const S mx = *std::max_element(row, row + v);
            S sum = 0;
            for (std::size_t j = 0; j < v; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            for (std::size_t j = 0; j < v; ++j) row[j] /= sum;
            loss -= std::log(static_cast<double>(row[static_cast<std::size_t>(targets[r])]));
        }
        return loss / static_cast<double>(n);
    }

    /// Gradients of the last forward's loss into `grads` (overwritten).
    void backward() {
        const std::size_t d = c_.hidden_size, n = batch_ * seq_, v = c_.vocab_size;
        const std::size_t inter = c_.intermediate_size, kvd = c_.kv_dim();
        std::fill(grads.begin(), grads.end(), S(0));

        std::vector<S> dlogits(probs_);
        const S inv_n = S(1) / static_cast<S>(n);
        for (std::size_t r = 0; r < n; ++r) {
            dlogits[r * v + static_cast<std::size_t>(targets_[r])] -= S(1);
        }
        for (S& g : dlogits) g *= inv_n;

        std::vector<S> dh(n * d), dx(n * d, S(0));
        mm_nn(dlogits.data(), P(lm_head_), dh.data(), n, v, d, false);
        mm_tn_acc(dlogits.data(), hf_.data(), G(lm_head_), n, v, d);
        norm_backward(dh.data(), final_, final_norm_, dx.data());

        std::vector<S> dact(n * inter), dgate(n * inter), dup(n * inter);
        std::vector<S> dao(n * d), dq(n * d), dk(n * kvd), dv(n * kvd);
        for (std::size_t li = c_.n_layers; li-- > 0;) {
            const LayerSlots& ls = layers_[li];
            LayerCache& lc = cache_[li];

            // MLP block: x += down(silu(gate h2) * up h2)
            mm_nt(dx.data(), P(ls.down), dact.data(), n, d, inter, false, scratch_);
            mm_tn_acc(lc.act.data(), dx.data(), G(ls.down), n, inter, d);
            for (std::size_t i = 0; i < n * inter; ++i) {
                const S g = lc.gate[i];
                const S sig = S(1) / (S(1) + std::exp(-g));
                const S silu = g * sig;
                dup[i] = dact[i] * silu;
                dgate[i] = dact[i] * lc.up[i] * sig * (S(1) + g * (S(1) - sig));
            }
            mm_nt(dgate.data(), P(ls.gate), dh.data(), n, inter, d, false, scratch_);
            mm_nt(dup.data(), P(ls.up), dh.data(), n, inter, d, true, scratch_);
            mm_tn_acc(lc.h2.data(), dgate.data(), G(ls.gate), n, d, inter);
            mm_tn_acc(lc.h2.data(), dup.data(), G(ls.up), n, d, inter);
            norm_backward(dh.data(), lc.n2, ls.mlp_norm, dx.data());

            // Attention block: x += o(attn(q h1, k h1, v h1))
            mm_nt(dx.data(), P(ls.o), dao.data(), n, d, d, false, scratch_);
            mm_tn_acc(lc.ao.data(), dx.data(), G(ls.o), n, d, d);
            attention_backward(lc, dao.data(), dq.data(), dk.data(), dv.data());
            if (c_.positional_kind == PositionalKind::rotary) {
                rope(dq.data(), c_.n_heads, true);
                rope(dk.data(), c_.n_kv_heads, true);
            }
            mm_nt(dq.data(), P(ls.q), dh.data(), n, d, d, false, scratch_);
            mm_nt(dk.data(), P(ls.k), dh.data(), n, kvd, d, true, scratch_);
            mm_nt(dv.data(), P(ls.v), dh.data(), n, kvd, d, true, scratch_);
            mm_tn_acc(lc.h1.data(), dq.data(), G(ls.q), n, d, d);
            mm_tn_acc(lc.h1.data(), dk.data(), G(ls.k), n, d, kvd);
            mm_tn_acc(lc.h1.data(), dv.data(), G(ls.v), n, d, kvd);
            norm_backward(dh.data(), lc.n1, ls.attn_norm, dx.data());
        }
        for (std::size_t r = 0; r < n; ++r) {
            S* ge = G(embed_) + static_cast<std::size_t>(inputs_[r]) * d;
            for (std::size_t i = 0; i < d; ++i) ge[i] += dx[r * d + i];
            if (pos_ >= 0) {
                S* gp = G(pos_) + (r % seq_) * d;
                for (std::size_t i = 0; i < d; ++i) gp[i] += dx[r * d + i];
            }
        }
    }

    std::vector<S> params;
    std::vector<S> grads;

private:
    struct NormCache {
        NormCache() = default;
        NormCache(std::size_t n, std::size_t d) : xhat(n * d), rstd(n) {}
        std::vector<S> xhat;
        std::vector<S> rstd;
    };
    struct LayerSlots {
        long attn_norm = -1, q = -1, k = -1, v = -1, o = -1, mlp_norm = -1, gate = -1, up = -1, down = -1;
    };
    struct LayerCache {
        NormCache n1, n2;
        std::vector<S> h1, h2, q, k, v, att, ao, gate, up, act;
    };

    long find(const std::string& name) const {
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (slots_[i].name == name) return static_cast<long>(i);
        }
        throw FormatError("training graph has no parameter " + name);
    }
    long find_opt(const std::string& name) const {
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (slots_[i].name == name) return static_cast<long>(i);
        }
        return -1;
    }
    S* P(long slot) { return params.data() + slots_[static_cast<std::size_t>(slot)].offset; }
    const S* P(long slot) const { return params.data() + slots_[static_cast<std::size_t>(slot)].offset; }
    S* G(long slot) { return grads.data() + slots_[static_cast<std::size_t>(slot)].offset; }

    // out = norm(x) [* gain]; caches xhat and rstd.
    void norm_forward(const S* x, NormCache& nc, long gain_slot, S* out) {
        const std::size_t d = c_.hidden_size, n = batch_ * seq_;
        const bool centered = c_.norm_kind == NormKind::nonparametric_layernorm;
        for (std::size_t r = 0; r < n; ++r) {
            const S* xr = x + r * d;
            S mean = 0;
            if (centered) {
                for (std::size_t i = 0; i < d; ++i) mean += xr[i];
                mean /= static_cast<S>(d);
            }
            S var = 0;
            for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
            var /= static_cast<S>(d);
            const S rstd = S(1) / std::sqrt(var + static_cast<S>(kNormEps));
            nc.rstd[r] = rstd;
            S* xh = nc.xhat.data() + r * d;
            for (std::size_t i = 0; i < d; ++i) xh[i] = (xr[i] - mean) * rstd;
            if (gain_slot >= 0) {
                const S* g = P(gain_slot);
                for (std::size_t i = 0; i < d; ++i) out[r * d + i] = xh[i] * g[i];
            } else {
                std::copy(xh, xh + d, out + r * d);
            }
        }
    }

    // dx += d norm / dx applied to dout; accumulates gain gradients.
    void norm_backward(const S* dout, const NormCache& nc, long gain_slot, S* dx) {
        const std::size_t d = c_.hidden_size, n = batch_ * seq_;
        const bool centered = c_.norm_kind == NormKind::nonparametric_layernorm;
        std::vector<S> dxh(d);
        for (std::size_t r = 0; r < n; ++r) {
            const S* xh = nc.xhat.data() + r * d;
            const S* dr = dout + r * d;
            if (gain_slot >= 0) {
                const S* g = P(gain_slot);
                S* gg = G(gain_slot);
                for (std::size_t i = 0; i < d; ++i) {
                    gg[i] += dr[i] * xh[i];
                    dxh[i] = dr[i] * g[i];
                }
            } else {
                std::copy(dr, dr + d, dxh.begin());
            }
            S mean_d = 0, mean_dx = 0;
            for (std::size_t i = 0; i < d; ++i) {
                mean_d += dxh[i];
                mean_dx += dxh[i] * xh[i];
            }
            mean_d /= static_cast<S>(d);
            mean_dx /= static_cast<S>(d);
            if (!centered) mean_d = 0;
            const S rstd = nc.rstd[r];
            for (std::size_t i = 0; i < d; ++i) dx[r * d + i] += rstd * (dxh[i] - mean_d - xh[i] * mean_dx);
        }
    }

    // Rotates each head's halves by position; inverse rotation for gradients.
    void rope(S* data, std::size_t heads, bool inverse) {
        const std::size_t hd = c_.head_dim(), half = hd / 2, n = batch_ * seq_;
        const std::size_t stride = heads * hd;
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t pos = r % seq_;
            const S* cs = rope_cos_.data() + pos * half;
            const S* sn = rope_sin_.data() + pos * half;
            for (std::size_t h = 0; h < heads; ++h) {
                S* vec = data + r * stride + h * hd;
                for (std::size_t i = 0; i < half; ++i) {
                    const S x1 = vec[i], x2 = vec[i + half];
                    const S s = inverse ? -sn[i] : sn[i];
                    vec[i] = x1 * cs[i] - x2 * s;
                    vec[i + half] = x1 * s + x2 * cs[i];
                }
            }
        }
    }

    void attention_forward(LayerCache& lc) {
        const std::size_t d = c_.hidden_size, hd = c_.head_dim(), kvd = c_.kv_dim();
        const std::size_t group = c_.n_heads / c_.n_kv_heads;
        const S scale = S(1) / std::sqrt(static_cast<S>(hd));
        std::fill(lc.ao.begin(), lc.ao.end(), S(0));
        for (std::size_t b = 0; b < batch_; ++b) {
            for (std::size_t h = 0; h < c_.n_heads; ++h) {
                const std::size_t kvh = h / group;
                for (std::size_t t = 0; t < seq_; ++t) {
                    const S* qt = lc.q.data() + (b * seq_ + t) * d + h * hd;
                    S* att = lc.att.data() + ((b * c_.n_heads + h) * seq_ + t) * seq_;
                    S mx = -std::numeric_limits<S>::infinity();
                    for (std::size_t s = 0; s <= t; ++s) {
                        const S* ks = lc.k.data() + (b * seq_ + s) * kvd + kvh * hd;
                        S acc = 0;
                        for (std::size_t i = 0; i < hd; ++i) acc += qt[i] * ks[i];
                        att[s] = acc * scale;
                        mx = std::max(mx, att[s]);
                    }
                    S sum = 0;
                    for (std::size_t s = 0; s <= t; ++s) {
                        att[s] = std::exp(att[s] - mx);
                        sum += att[s];
                    }
                    S* out = lc.ao.data() + (b * seq_ + t) * d + h * hd;
                    for (std::size_t s = 0; s <= t; ++s) {
                        att[s] /= sum;
                        const S* vs = lc.v.data() + (b * seq_ + s) * kvd + kvh * hd;
                        for (std::size_t i = 0; i < hd; ++i) out[i] += att[s] * vs[i];
                    }
                }
            }
        }
    }

    void attention_backward(const LayerCache& lc, const S* dao, S* dq, S* dk, S* dv) {
        const std::size_t d = c_.hidden_size, hd = c_.head_dim(), kvd = c_.kv_dim();
        const std::size_t n = batch_ * seq_;
        const std::size_t group = c_.n_heads / c_.n_kv_heads;
        const S scale = S(1) / std::sqrt(static_cast<S>(hd));
        std::fill(dq, dq + n * d, S(0));
        std::fill(dk, dk + n * kvd, S(0));
        std::fill(dv, dv + n * kvd, S(0));
        std::vector<S> dp(seq_);
        for (std::size_t b = 0; b < batch_; ++b) {
            for (std::size_t h = 0; h < c_.n_heads; ++h) {
                const std::size_t kvh = h / group;
                for (std::size_t t = 0; t < seq_; ++t) {
                    const S* att = lc.att.data() + ((b * c_.n_heads + h) * seq_ + t) * seq_;
                    const S* dout = dao + (b * seq_ + t) * d + h * hd;
                    const S* qt = lc.q.data() + (b * seq_ + t) * d + h * hd;
                    S* dqt = dq + (b * seq_ + t) * d + h * hd;
                    S dot_sum = 0;
                    for (std::size_t s = 0; s <= t; ++s) {
                        const S* vs = lc.v.data() + (b * seq_ + s) * kvd + kvh * hd;
                        S* dvs = dv + (b * seq_ + s) * kvd + kvh * hd;
                        S acc = 0;
                        for (std::size_t i = 0; i < hd; ++i) {
                            acc += dout[i] * vs[i];
                            dvs[i] += att[s] * dout[i];
                        }
                        dp[s] = acc;
                        dot_sum += att[s] * acc;
                    }
                    for (std::size_t s = 0; s <= t; ++s) {
                        const S ds = att[s] * (dp[s] - dot_sum) * scale;
                        const S* ks = lc.k.data() + (b * seq_ + s) * kvd + kvh * hd;
                        S* dks = dk + (b * seq_ + s) * kvd + kvh * hd;
                        for (std::size_t i = 0; i < hd; ++i) {
                            dqt[i] += ds * ks[i];
                            dks[i] += ds * qt[i];
                        }
                    }
                }
            }
        }
    }

    ModelConfig c_;
    std::size_t batch_;
    std::size_t seq_;
    std::vector<Slot> slots_;
    std::vector<LayerSlots> layers_;
    std::vector<LayerCache> cache_;
    long embed_ = -1, pos_ = -1, final_norm_ = -1, lm_head_ = -1;
    NormCache final_;
    std::vector<S> x_, hf_, probs_, scratch_;
    std::vector<S> rope_cos_, rope_sin_;
    std::vector<TokenId> inputs_, targets_;
};

}  // namespace resprobe::detail
