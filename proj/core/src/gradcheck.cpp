// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "resprobe/error.hpp"
#include "resprobe/trainer.hpp"
#include "train_graph.hpp"

namespace resprobe {

bool GradcheckReport::passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.ok; });
}

double GradcheckReport::max_rel_error() const {
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.rel_error);
    return worst;
}

std::string GradcheckReport::first_failure() const {
    for (const auto& e : entries) {
        if (!e.ok) return e.param;
    }
    return {};
}

GradcheckReport gradcheck(const ModelConfig& config, std::span<const TokenId> sample,
                          const GradcheckOptions& options) {
    if (sample.size() < 2) throw InputError("gradcheck needs a sample of at least 2 tokens");
    for (TokenId t : sample) {
        if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size) {
            throw VocabError("gradcheck sample token " + std::to_string(t) + " is outside the vocabulary");
        }
    }
    if (!(options.step > 0.0)) throw InputError("gradcheck step must be positive");

    const std::size_t seq = std::min(sample.size() - 1, config.max_seq_len);
    detail::TrainGraph<double> g(config, 1, seq);
    g.load(init_weights(config, options.init_std, options.seed));
    const std::vector<TokenId> in(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(seq));
    const std::vector<TokenId> tgt(sample.begin() + 1, sample.begin() + static_cast<std::ptrdiff_t>(seq + 1));

    g.forward(in, tgt);
    g.backward();
    const std::vector<double> analytic = g.grads;

    std::vector<std::string> names;
    if (options.params) {
        names = *options.params;
    } else {
        for (const auto& s : g.slots()) names.push_back(s.name);
    }

    GradcheckReport report;
    report.tolerance = options.tolerance;
    std::mt19937_64 rng(options.seed + 1);
    for (const auto& name : names) {
        const auto& slot = g.slot(name);
        std::uniform_int_distribution<std::size_t> pick(0, slot.size - 1);
        const std::size_t n = std::min(options.samples_per_param, slot.size);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t index = pick(rng);
            const std::size_t flat = slot.offset + index;
            const double saved = g.params[flat];
            g.params[flat] = saved + options.step;
            const double up = g.forward(in, tgt);
            g.params[flat] = saved - options.step;
            const double down = g.forward(in, tgt);
            g.params[flat] = saved;

            GradcheckEntry e;
            e.param = name;
            e.index = index;
            e.analytic = analytic[flat];
            if (options.corrupt_param && *options.corrupt_param == name) e.analytic *= 1.5;
            e.numeric = (up - down) / (2.0 * options.step);
            const double scale = std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-6});
            e.rel_error = std::abs(e.analytic - e.numeric) / scale;
            e.ok = e.rel_error <= options.tolerance;
            report.entries.push_back(e);
        }
    }
    return report;
}

}  // namespace resprobe
