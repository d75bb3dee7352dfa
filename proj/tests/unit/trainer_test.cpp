// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "resprobe/corpus.hpp"
#include "resprobe/error.hpp"
#include "resprobe/tokenizer.hpp"
#include "resprobe/trainer.hpp"
#include "test_util.hpp"

namespace resprobe {
namespace {

using testing::random_tokens;
using testing::small_config;

TrainConfig quick_config(std::size_t vocab) {
    TrainConfig tc = train_preset("micro", vocab);
    tc.seq_len = 16;
    tc.batch_size = 4;
    tc.total_tokens = tc.tokens_per_step() * 30;
    tc.warmup_steps = 5;
    tc.checkpoint_tokens = {tc.tokens_per_step() * 10, tc.total_tokens};
    tc.eval_batches = 2;
    return tc;
}

std::vector<TokenId> synthetic_ids(std::size_t chars, std::size_t* vocab) {
    const std::string text = synthetic_text(chars, 9);
    const CharTokenizer tok = CharTokenizer::from_text(text);
    *vocab = tok.vocab_size();
    return tok.encode(text);
}

TEST(GradcheckTest, AllParametersAgreeWithFiniteDifferences) {
    for (auto norm : {NormKind::nonparametric_layernorm, NormKind::rmsnorm}) {
        for (auto pos : {PositionalKind::rotary, PositionalKind::learned}) {
            ModelConfig c = small_config(norm, pos);
            c.n_layers = 2;
            const GradcheckReport report = gradcheck(c, random_tokens(7, 40, 3));
            EXPECT_TRUE(report.passed()) << report.first_failure() << " " << report.max_rel_error();
            EXPECT_LE(report.max_rel_error(), 1e-3);
            EXPECT_FALSE(report.entries.empty());
        }
    }
}

TEST(GradcheckTest, CorruptedGradientIsCaught) {
    GradcheckOptions opts;
    opts.corrupt_param = param::layer(0, "mlp.up.weight");
    const GradcheckReport report = gradcheck(small_config(), random_tokens(7, 40, 3), opts);
    EXPECT_FALSE(report.passed());
    EXPECT_EQ(report.first_failure(), param::layer(0, "mlp.up.weight"));
}

TEST(GradcheckTest, EmptyParameterListProbesNothing) {
    GradcheckOptions opts;
    opts.params = std::vector<std::string>{};
    const GradcheckReport report = gradcheck(small_config(), random_tokens(5, 40, 1), opts);
    EXPECT_TRUE(report.entries.empty());
    EXPECT_TRUE(report.passed());
}

TEST(GradcheckTest, UnsupportedArchitectureThrows) {
    ModelConfig c = small_config();
    c.mlp_kind = MlpKind::gelu;
    EXPECT_THROW(gradcheck(c, random_tokens(5, 40, 1)), ConfigError);
}

TEST(LogSpacedMarksTest, EndpointsAndGranularity) {
    const auto marks = log_spaced_marks(1024, 2'097'152, 6, 1024);
    ASSERT_EQ(marks.size(), 6u);
    EXPECT_EQ(marks.front(), 1024u);
    EXPECT_EQ(marks.back(), 2'097'152u);
    for (std::size_t i = 0; i < marks.size(); ++i) {
        EXPECT_EQ(marks[i] % 1024, 0u);
        if (i > 0) {
            EXPECT_GT(marks[i], marks[i - 1]);
            const double ratio = double(marks[i]) / marks[i - 1];
            EXPECT_NEAR(ratio, std::pow(2048.0, 0.2), 0.6);
        }
    }
}

TEST(LogSpacedMarksTest, CollapsesDuplicates) {
    const auto marks = log_spaced_marks(1, 4, 10, 2);
    EXPECT_EQ(marks, (std::vector<std::uint64_t>{2, 4}));
}

TEST(TrainConfigTest, WarmupThenCosineFloor) {
    TrainConfig tc = quick_config(40);
    tc.total_tokens = tc.tokens_per_step() * 100;
    tc.checkpoint_tokens = {};
    tc.warmup_steps = 10;
    EXPECT_NEAR(tc.lr_at(0), tc.learning_rate / 10.0, 1e-12);
    EXPECT_NEAR(tc.lr_at(9), tc.learning_rate, 1e-12);
    EXPECT_LT(tc.lr_at(60), tc.lr_at(20));
    EXPECT_NEAR(tc.lr_at(99), tc.learning_rate * tc.min_lr_ratio, tc.learning_rate * 0.01);
    for (std::uint64_t s = 0; s < 100; ++s) EXPECT_GE(tc.lr_at(s), tc.learning_rate * tc.min_lr_ratio - 1e-12);
}

TEST(TrainConfigTest, ValidateRejectsBadSchedules) {
    TrainConfig tc = quick_config(40);
    EXPECT_NO_THROW(tc.validate());
    tc.checkpoint_tokens = {tc.tokens_per_step() * 10, tc.tokens_per_step() * 5};
    EXPECT_THROW(tc.validate(), ConfigError);
    tc = quick_config(40);
    tc.checkpoint_tokens = {tc.tokens_per_step() * 10};
    EXPECT_THROW(tc.validate(), ConfigError);
    tc = quick_config(40);
    tc.model.norm_kind = NormKind::layernorm;
    EXPECT_THROW(tc.validate(), ConfigError);
    EXPECT_THROW(train_preset("huge", 40), ConfigError);
}

TEST(TrainPresetTest, ShapesMatchNames) {
    const TrainConfig tiny = train_preset("tiny", 100);
    EXPECT_EQ(tiny.model.hidden_size, 64u);
    EXPECT_EQ(tiny.model.n_layers, 4u);
    EXPECT_EQ(tiny.model.vocab_size, 100u);
    const TrainConfig micro = train_preset("micro", 100);
    EXPECT_EQ(micro.model.hidden_size, 32u);
    EXPECT_EQ(micro.model.n_layers, 2u);
}

TEST(InitWeightsTest, SeededAndScaled) {
    const ModelConfig c = small_config();
    EXPECT_EQ(init_weights(c, 0.02, 5), init_weights(c, 0.02, 5));
    EXPECT_NE(init_weights(c, 0.02, 5), init_weights(c, 0.02, 6));
    const ModelWeights w = init_weights(c, 0.02, 5);
    double sq = 0.0;
    const Tensor& e = w.get(param::kEmbed);
    for (float v : e.data()) sq += double(v) * v;
    EXPECT_NEAR(std::sqrt(sq / e.size()), 0.02, 0.004);
}

TEST(EvaluateLossTest, MatchesPerPositionForwardOracle) {
    const ModelConfig c = small_config();
    const ModelWeights w = init_weights(c, 0.3, 2);
    const Model m(c, w);
    std::vector<std::vector<TokenId>> windows = {random_tokens(9, 40, 1), random_tokens(9, 40, 2)};
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& win : windows) {
        for (std::size_t t = 1; t < win.size(); ++t) {
            const Tensor logits = m.forward(std::span(win).first(t)).logits;
            double mx = logits[0];
            for (float v : logits.data()) mx = std::max(mx, double(v));
            double z = 0.0;
            for (float v : logits.data()) z += std::exp(double(v) - mx);
            total += mx + std::log(z) - logits[static_cast<std::size_t>(win[t])];
            ++count;
        }
    }
    EXPECT_NEAR(evaluate_loss(c, w, windows), total / count, 1e-4);
}

TEST(TrainTest, DeterministicForSeed) {
    std::size_t vocab = 0;
    const auto ids = synthetic_ids(20000, &vocab);
    const TrainConfig tc = quick_config(vocab);
    const auto a = train(tc, ids);
    const auto b = train(tc, ids);
    ASSERT_EQ(a.size(), 3u);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(a[0].tokens_seen, 0u);
    EXPECT_EQ(a[0].weights, b[0].weights);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].tokens_seen, b[i].tokens_seen);
        EXPECT_NEAR(a[i].loss_at_save, b[i].loss_at_save, 1e-4);
    }
    EXPECT_EQ(a.back().tokens_seen, tc.total_tokens);
}

TEST(TrainTest, LossDecreases) {
    std::size_t vocab = 0;
    const auto ids = synthetic_ids(30000, &vocab);
    TrainConfig tc = quick_config(vocab);
    tc.total_tokens = tc.tokens_per_step() * 120;
    tc.checkpoint_tokens = {};
    std::vector<TrainLogRow> rows;
    TrainCallbacks cb;
    cb.on_step = [&](const TrainLogRow& r) { rows.push_back(r); };
    const auto ckpts = train(tc, ids, cb);
    ASSERT_EQ(rows.size(), 120u);
    ASSERT_EQ(ckpts.size(), 2u);
    EXPECT_LT(ckpts.back().loss_at_save, ckpts.front().loss_at_save - 0.5);
    EXPECT_NEAR(ckpts.front().loss_at_save, std::log(double(vocab)), 0.5);
}

TEST(TrainTest, CheckpointCallbackSeesEveryMark) {
    std::size_t vocab = 0;
    const auto ids = synthetic_ids(20000, &vocab);
    const TrainConfig tc = quick_config(vocab);
    std::vector<std::uint64_t> seen;
    TrainCallbacks cb;
    cb.on_checkpoint = [&](const Checkpoint& ck) { seen.push_back(ck.tokens_seen); };
    cb.keep_checkpoints = false;
    EXPECT_TRUE(train(tc, ids, cb).empty());
    EXPECT_EQ(seen, (std::vector<std::uint64_t>{0, tc.checkpoint_tokens[0], tc.total_tokens}));
}

TEST(TrainTest, TooShortCorpusThrows) {
    const TrainConfig tc = quick_config(40);
    EXPECT_THROW(train(tc, random_tokens(20, 40, 1)), CorpusError);
}

TEST(TrainTest, HugeLearningRateDiverges) {
    std::size_t vocab = 0;
    const auto ids = synthetic_ids(20000, &vocab);
    TrainConfig tc = quick_config(vocab);
    tc.learning_rate = 1e38;
    tc.grad_clip = 0.0;
    tc.warmup_steps = 0;
    EXPECT_THROW(train(tc, ids), DivergenceError);
}

}  // namespace
}  // namespace resprobe
