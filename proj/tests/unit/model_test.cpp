// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "resprobe/error.hpp"
#include "resprobe/model.hpp"
#include "resprobe/weights_io.hpp"
#include "test_util.hpp"

namespace resprobe {
namespace {

using testing::random_model;
using testing::random_tokens;
using testing::small_config;

float max_abs_diff(const Tensor& a, const Tensor& b) {
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

TEST(ModelConfigTest, RejectsBadShapes) {
    ModelConfig c = small_config();
    c.hidden_size = 18;
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_config();
    c.n_kv_heads = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_config();
    c.vocab_size = 1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfigTest, JsonRoundTrip) {
    ModelConfig c = small_config(NormKind::layernorm, PositionalKind::learned);
    c.mlp_kind = MlpKind::gelu;
    c.attn_bias = true;
    const nlohmann::json j = c;
    EXPECT_EQ(j.get<ModelConfig>(), c);
}

TEST(ModelWeightsTest, ValidateReportsMissingAndMisshapen) {
    const ModelConfig c = small_config();
    ModelWeights w = init_weights(c, 0.02, 1);
    EXPECT_NO_THROW(w.validate(c));
    w.set("extra.weight", Tensor({2}));
    EXPECT_THROW(w.validate(c), FormatError);
    w = init_weights(c, 0.02, 1);
    w.set(param::kEmbed, Tensor({3, 3}));
    EXPECT_THROW(w.validate(c), FormatError);
    EXPECT_THROW(Model(c, ModelWeights{}), FormatError);
}

TEST(ModelTest, LogitsHaveVocabSizeAndAreFinite) {
    for (auto norm : {NormKind::nonparametric_layernorm, NormKind::rmsnorm}) {
        for (auto pos : {PositionalKind::rotary, PositionalKind::learned}) {
            const Model m = random_model(small_config(norm, pos), 5);
            const ForwardOutput out = m.forward(random_tokens(9, 40, 1));
            EXPECT_EQ(out.logits.size(), 40u);
            EXPECT_EQ(out.final_resid.size(), 16u);
            EXPECT_TRUE(out.logits.all_finite());
        }
    }
}

TEST(ModelTest, RepeatedCallsAreBitIdentical) {
    const Model m = random_model(small_config(), 2);
    const auto ids = random_tokens(12, 40, 3);
    const ForwardOutput a = m.forward(ids), b = m.forward(ids);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.final_resid, b.final_resid);
}

TEST(ModelTest, RejectsBadTokens) {
    const Model m = random_model(small_config(), 2);
    EXPECT_THROW(m.forward(std::vector<TokenId>{}), InputError);
    EXPECT_THROW(m.forward(std::vector<TokenId>{1, 40}), VocabError);
    EXPECT_THROW(m.forward(std::vector<TokenId>{-1}), VocabError);
    EXPECT_THROW(m.forward(random_tokens(25, 40, 1)), InputError);
    EXPECT_THROW(m.hook(3), InputError);
}

TEST(ModelTest, CausalPrefixInvariance) {
    const Model m = random_model(small_config(), 4);
    auto ids = random_tokens(8, 40, 9);
    const Tensor before = m.capture(std::span(ids).first(5), m.hook(1));
    ids[6] = (ids[6] + 1) % 40;
    const Tensor after = m.capture(std::span(ids).first(5), m.hook(1));
    EXPECT_EQ(before, after);
}

TEST(ModelTest, FinalLayerCaptureIsFinalResidual) {
    const Model m = random_model(small_config(), 6);
    const auto ids = random_tokens(7, 40, 2);
    EXPECT_EQ(m.capture(ids, m.hook(2)), m.forward(ids).final_resid);
}

TEST(PatchTest, IdentityPatchReproducesCleanRun) {
    for (auto norm : {NormKind::nonparametric_layernorm, NormKind::rmsnorm}) {
        const Model m = random_model(small_config(norm), 11);
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto ids = random_tokens(3 + s * 3, 40, s);
            const ForwardOutput clean = m.forward(ids);
            for (std::size_t l = 0; l < 3; ++l) {
                const Tensor x = m.capture(ids, m.hook(l));
                const ForwardOutput patched = m.forward_patched(ids, {m.hook(l), x});
                EXPECT_LE(max_abs_diff(patched.logits, clean.logits), 1e-5f);
            }
        }
    }
}

TEST(PatchTest, LastLayerPatchSetsFinalResidual) {
    const Model m = random_model(small_config(), 3);
    const auto ids = random_tokens(6, 40, 4);
    const Tensor x = testing::random_tensor({16}, 77);
    EXPECT_EQ(m.forward_patched(ids, {m.hook(2), x}).final_resid, x);
}

TEST(PatchTest, ZeroPatchChangesOutput) {
    const Model m = load_model(testing::data_dir() / "fixture_model.rpw");
    const auto ids = random_tokens(10, m.config().vocab_size, 4);
    const ForwardOutput clean = m.forward(ids);
    const ForwardOutput zero = m.forward_patched(ids, {m.hook(0), Tensor({m.config().hidden_size})});
    EXPECT_GT(l2_distance(clean.final_resid, zero.final_resid), 0.0f);
}

TEST(PatchTest, DifferentPromptsCaptureDifferentVectors) {
    const Model m = load_model(testing::data_dir() / "fixture_model.rpw");
    const auto a = random_tokens(10, m.config().vocab_size, 1);
    const auto b = random_tokens(10, m.config().vocab_size, 2);
    EXPECT_GT(l2_distance(m.capture(a, m.hook(0)), m.capture(b, m.hook(0))), 0.0f);
}

TEST(PatchTest, ReplacementLengthChecked) {
    const Model m = random_model(small_config(), 3);
    EXPECT_THROW(m.forward_patched(random_tokens(4, 40, 1), {m.hook(0), Tensor({15})}), DimensionError);
    const PatchSession session(m, random_tokens(4, 40, 1), m.hook(0));
    EXPECT_THROW(session.run(std::vector<float>(17)), DimensionError);
}

TEST(PatchSessionTest, BitIdenticalToFullRecompute) {
    for (auto pos : {PositionalKind::rotary, PositionalKind::learned}) {
        const Model m = random_model(small_config(NormKind::rmsnorm, pos), 21);
        const auto ids = random_tokens(11, 40, 8);
        for (std::size_t l = 0; l < 3; ++l) {
            const PatchSession session(m, ids, m.hook(l));
            EXPECT_EQ(session.captured(), m.capture(ids, m.hook(l)));
            EXPECT_EQ(session.clean().logits, m.forward(ids).logits);
            for (std::uint64_t s = 0; s < 3; ++s) {
                const Tensor x = testing::random_tensor({16}, s + 10 * l, 2.0f);
                const ForwardOutput fast = session.run(x.data());
                const ForwardOutput full = m.forward_patched(ids, {m.hook(l), x});
                EXPECT_EQ(fast.logits, full.logits);
                EXPECT_EQ(fast.final_resid, full.final_resid);
            }
        }
    }
}

TEST(PatchSessionTest, SingleTokenPrompt) {
    const Model m = random_model(small_config(), 1);
    const std::vector<TokenId> ids = {7};
    const PatchSession session(m, ids, m.hook(0));
    const Tensor x = testing::random_tensor({16}, 3);
    EXPECT_EQ(session.run(x.data()).logits, m.forward_patched(ids, {m.hook(0), x}).logits);
}

TEST(PatchSessionTest, CountsForwardPasses) {
    const Model m = random_model(small_config(), 1);
    const auto ids = random_tokens(5, 40, 1);
    const PatchSession session(m, ids, m.hook(1));
    for (int i = 0; i < 4; ++i) session.run(session.captured().data());
    EXPECT_EQ(m.clean_forward_count(), 1u);
    EXPECT_EQ(m.patched_forward_count(), 4u);
}

TEST(TopPredictionTest, Argmax) {
    EXPECT_EQ(top_prediction(std::vector<float>{0.1f, 0.9f, 0.3f}), 1);
}

TEST(TopPredictionTest, TieGoesToLowestId) {
    EXPECT_EQ(top_prediction(std::vector<float>{0.5f, 0.5f}), 0);
}

}  // namespace
}  // namespace resprobe
