// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "resprobe/corpus.hpp"
#include "resprobe/model.hpp"
#include "resprobe/probe.hpp"
#include "resprobe/tensor.hpp"
#include "resprobe/tokenizer.hpp"
#include "resprobe/trainer.hpp"

namespace {

using namespace resprobe;

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) x = u(rng);
    return v;
}

std::vector<TokenId> random_ids(std::size_t n, std::size_t vocab, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<TokenId> dist(0, static_cast<TokenId>(vocab - 1));
    std::vector<TokenId> ids(n);
    for (auto& t : ids) t = dist(rng);
    return ids;
}

Model tiny_model() {
    const ModelConfig c = train_preset("tiny", 97).model;
    return Model(c, init_weights(c, 0.02, 1));
}

void BM_Gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_floats(n * n, 1), b = random_floats(n * n, 2);
    std::vector<float> out(n * n);
    for (auto _ : state) {
        gemm(a, b, out, n, n, n);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_Forward(benchmark::State& state) {
    const Model m = tiny_model();
    const auto ids = random_ids(static_cast<std::size_t>(state.range(0)), 97, 3);
    for (auto _ : state) benchmark::DoNotOptimize(m.forward(ids));
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(64);

void BM_ForwardPatched(benchmark::State& state) {
    const Model m = tiny_model();
    const auto ids = random_ids(10, 97, 3);
    const Tensor x = m.capture(ids, m.hook(0));
    for (auto _ : state) benchmark::DoNotOptimize(m.forward_patched(ids, {m.hook(0), x}));
}
BENCHMARK(BM_ForwardPatched);

void BM_PatchSessionRun(benchmark::State& state) {
    const Model m = tiny_model();
    const auto ids = random_ids(static_cast<std::size_t>(state.range(0)), 97, 3);
    const PatchSession session(m, ids, m.hook(0));
    for (auto _ : state) benchmark::DoNotOptimize(session.run(session.captured().data()));
}
BENCHMARK(BM_PatchSessionRun)->Arg(10)->Arg(64);

void BM_Sweep50(benchmark::State& state) {
    const Model m = tiny_model();
    const PromptPair pair{TokenSequence{random_ids(10, 97, 1), std::nullopt},
                          TokenSequence{random_ids(10, 97, 2), std::nullopt}, "p"};
    for (auto _ : state) benchmark::DoNotOptimize(sweep(m, pair));
}
BENCHMARK(BM_Sweep50);

void BM_TrainSteps(benchmark::State& state) {
    const std::string text = synthetic_text(200'000, 1);
    const CharTokenizer tok = CharTokenizer::from_text(text);
    const auto ids = tok.encode(text);
    TrainConfig tc = train_preset("tiny", tok.vocab_size());
    tc.total_tokens = tc.tokens_per_step() * 4;
    tc.eval_batches = 1;
    TrainCallbacks cb;
    cb.keep_checkpoints = false;
    for (auto _ : state) train(tc, ids, cb);
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tc.total_tokens));
}
BENCHMARK(BM_TrainSteps)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
