// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "resprobe/error.hpp"
#include "resprobe/model.hpp"

namespace resprobe {

PatchSession::PatchSession(const Model& model, std::span<const TokenId> tokens, HookPoint hook)
    : model_(&model), hook_(model.hook(hook.layer)) {
    model.check_tokens(tokens);
    model.counters_->clean.fetch_add(1, std::memory_order_relaxed);
    const std::size_t d = model.config().hidden_size;
    state_ = model.embed(tokens);
    const std::size_t last = (state_.seq_len - 1) * d;
    for (std::size_t l = 0; l < model.config().n_layers; ++l) {
        model.run_block(l, state_, 0);
        if (l == hook_.layer) {
            captured_ = Tensor({d}, std::vector<float>(state_.x.begin() + static_cast<std::ptrdiff_t>(last),
                                                       state_.x.begin() + static_cast<std::ptrdiff_t>(last + d)));
        }
    }
    clean_ = model.finish(std::span<const float>(state_.x).subspan(last, d));
    // Layers up to the hook are never rerun, so their caches are not needed.
    for (std::size_t l = 0; l <= hook_.layer; ++l) {
        state_.keys[l] = {};
        state_.values[l] = {};
    }
}

ForwardOutput PatchSession::run(std::span<const float> replacement) const {
    const Model& m = *model_;
    const std::size_t d = m.config().hidden_size;
    if (replacement.size() != d) {
        throw DimensionError("patch replacement has " + std::to_string(replacement.size()) +
                             " elements, hidden_size is " + std::to_string(d));
    }
    m.counters_->patched.fetch_add(1, std::memory_order_relaxed);
    Model::State s;
    s.seq_len = state_.seq_len;
    s.x.assign(s.seq_len * d, 0.0f);
    const std::size_t last_row = s.seq_len - 1;
    std::copy(replacement.begin(), replacement.end(), s.x.begin() + static_cast<std::ptrdiff_t>(last_row * d));
    s.keys.resize(m.config().n_layers);
    s.values.resize(m.config().n_layers);
    for (std::size_t l = hook_.layer + 1; l < m.config().n_layers; ++l) {
        s.keys[l] = state_.keys[l];
        s.values[l] = state_.values[l];
        m.run_block(l, s, last_row);
    }
    return m.finish(std::span<const float>(s.x).subspan(last_row * d, d));
}

}  // namespace resprobe
