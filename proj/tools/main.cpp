// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "resprobe/error.hpp"
#include "resprobe/version.hpp"

namespace {

using namespace resprobe::cli;

void add_tokenizer(CLI::App* cmd, TokenizerFlags& t) {
    cmd->add_option("--tokenizer", t.vocab,
                    "Tokenizer vocabulary: char-level token file or BPE vocab.json "
                    "(default: tokenizer.txt beside the weights)");
    cmd->add_option("--merges", t.merges, "BPE merges.txt; selects the BPE tokenizer");
}

void add_threads(CLI::App* cmd, std::size_t& threads) {
    cmd->add_option("--threads", threads,
                    "Worker threads; 0 uses RESID_PROBE_THREADS or the machine's parallelism")
        ->capture_default_str();
}

constexpr const char* kLayerHelp =
    "Hook layer, 0-indexed over blocks: 0 patches the residual stream after the first block, "
    "6 after the seventh";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probe stable regions of a transformer's residual stream by activation patching"};
    app.set_version_flag("--version", std::string(resprobe::kVersion));
    app.require_subcommand(1);

    TrainFlags train;
    auto* train_cmd = app.add_subcommand("train", "Train a small model and save log-spaced checkpoints");
    train_cmd->add_option("--preset", train.preset, "Model preset: tiny or micro")->capture_default_str();
    train_cmd->add_option("--corpus", train.corpus, "Text file or directory of text files");
    train_cmd->add_option("--synthetic-chars", train.synthetic_chars,
                          "Size of the generated corpus when --corpus is absent")
        ->capture_default_str();
    add_tokenizer(train_cmd, train.tokenizer);
    train_cmd->add_option("--tokens", train.tokens, "Total training tokens")->capture_default_str();
    train_cmd->add_option("--checkpoints", train.checkpoints,
                          "Log-spaced checkpoints after the initialization")
        ->capture_default_str();
    train_cmd->add_option("--first-mark", train.first_mark, "Token count of the first mark (0: one step)");
    train_cmd->add_option("--lr", train.learning_rate, "Peak learning rate");
    train_cmd->add_option("--batch-size", train.batch_size, "Sequences per step");
    train_cmd->add_option("--seed", train.seed, "Seed for data, initialization and batches")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();

    SweepFlags sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Interpolate between prompt activations and measure output change");
    sweep_cmd->add_option("--weights", sweep.weights, "RPW1 weight file")->required();
    add_tokenizer(sweep_cmd, sweep.tokenizer);
    auto* pairs_opt = sweep_cmd->add_option("--pairs", sweep.pairs, "Pair manifest JSON");
    auto* fixtures_opt = sweep_cmd->add_flag("--fixtures", sweep.fixtures, "Use the six labeled reference pairs");
    auto* corpus_opt = sweep_cmd->add_option("--corpus", sweep.corpus, "Sample pairs from this corpus");
    pairs_opt->excludes(fixtures_opt)->excludes(corpus_opt);
    fixtures_opt->excludes(corpus_opt);
    sweep_cmd->add_option("--n-pairs", sweep.n_pairs, "Pairs to sample from the corpus")->capture_default_str();
    sweep_cmd->add_option("--token-len", sweep.token_len, "Tokens per sampled prompt")->capture_default_str();
    sweep_cmd->add_option("--min-separation", sweep.min_separation, "Minimum token distance within a pair")
        ->capture_default_str();
    sweep_cmd->add_option("--layer", sweep.layer, kLayerHelp)->capture_default_str();
    sweep_cmd->add_option("--points", sweep.points, "Points on the alpha grid, both ends included")
        ->capture_default_str();
    sweep_cmd->add_flag("--logit-diff", sweep.logit_diff, "Also record the normalized logit difference");
    sweep_cmd->add_option("--seed", sweep.seed, "Sampling seed")->capture_default_str();
    add_threads(sweep_cmd, sweep.threads);
    sweep_cmd->add_option("--out", sweep.out, "Output directory")->capture_default_str();

    SliceFlags slice;
    auto* slice_cmd = app.add_subcommand("slice", "Render 2D slices of the residual stream as PPM images");
    slice_cmd->add_option("--weights", slice.weights, "Weight files or glob patterns, one image each")
        ->required();
    add_tokenizer(slice_cmd, slice.tokenizer);
    slice_cmd->add_option("--prompt", slice.prompts, "Prompt text; give three (A, B, C)");
    slice_cmd->add_option("--corpus", slice.corpus, "Draw the three prompts from this corpus");
    slice_cmd->add_option("--token-len", slice.token_len, "Tokens per drawn prompt")->capture_default_str();
    slice_cmd->add_option("--min-separation", slice.min_separation, "Minimum token distance between drawn prompts")
        ->capture_default_str();
    slice_cmd->add_option("--seed", slice.seed, "Seed for drawing prompts")->capture_default_str();
    slice_cmd->add_option("--layer", slice.layer, kLayerHelp)->capture_default_str();
    slice_cmd->add_option("--n-alpha", slice.n_alpha, "Grid columns")->capture_default_str();
    slice_cmd->add_option("--n-beta", slice.n_beta, "Grid rows")->capture_default_str();
    slice_cmd->add_option("--alpha-range", slice.alpha_range, "lo hi")->expected(2)->capture_default_str();
    slice_cmd->add_option("--beta-range", slice.beta_range, "lo hi")->expected(2)->capture_default_str();
    add_threads(slice_cmd, slice.threads);
    slice_cmd->add_option("--out", slice.out, "Output directory")->capture_default_str();

    AggregateFlags agg;
    auto* agg_cmd = app.add_subcommand("aggregate", "Merge sweep files into median and quartile curves");
    agg_cmd->add_option("inputs", agg.inputs, "Sweep files (JSON, JSON list or JSON Lines)")->required();
    agg_cmd->add_option("--out", agg.out, "Output directory")->capture_default_str();

    GenCorpusFlags gen;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a seeded synthetic English-like corpus");
    gen_cmd->add_option("--chars", gen.chars, "Approximate size in characters")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output file")->capture_default_str();

    GradcheckFlags gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Compare trainer gradients with finite differences");
    gc_cmd->add_option("--preset", gc.preset, "Model preset")->capture_default_str();
    gc_cmd->add_option("--seq-len", gc.seq_len, "Sequence length")->capture_default_str();
    gc_cmd->add_option("--samples", gc.samples, "Entries probed per parameter")->capture_default_str();
    gc_cmd->add_option("--tolerance", gc.tolerance, "Relative error tolerance")->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed, "Seed")->capture_default_str();

    CheckFixtureFlags fx;
    auto* fx_cmd = app.add_subcommand("check-fixture", "Validate the engine against exported reference logits");
    fx_cmd->add_option("--weights", fx.weights, "RPW1 weight file")->required();
    fx_cmd->add_option("--fixture", fx.fixture, "Fixture JSON")->required();
    add_tokenizer(fx_cmd, fx.tokenizer);
    fx_cmd->add_option("--tolerance", fx.tolerance, "Max-abs logit tolerance")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train);
        if (*sweep_cmd) return cmd_sweep(sweep);
        if (*slice_cmd) return cmd_slice(slice);
        if (*agg_cmd) return cmd_aggregate(agg);
        if (*gen_cmd) return cmd_gen_corpus(gen);
        if (*gc_cmd) return cmd_gradcheck(gc);
        if (*fx_cmd) return cmd_check_fixture(fx);
    } catch (const resprobe::DegenerateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const resprobe::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const resprobe::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}
