// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Trains the tiny preset on 2M synthetic tokens,
// so expect several minutes on one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "resprobe/corpus.hpp"
#include "resprobe/parallel.hpp"
#include "resprobe/probe.hpp"
#include "resprobe/slice.hpp"
#include "resprobe/stats.hpp"
#include "resprobe/tensor.hpp"
#include "resprobe/tokenizer.hpp"
#include "resprobe/trainer.hpp"

namespace fs = std::filesystem;
using namespace resprobe;

namespace {

constexpr std::uint64_t kTrainTokens = 2'097'152;
constexpr std::size_t kCheckpoints = 6;
constexpr std::size_t kPairs = 100;
constexpr std::size_t kCorpusChars = 3'000'000;

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  " << detail << std::endl;
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<TokenId> random_ids(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
    std::uniform_int_distribution<TokenId> dist(0, static_cast<TokenId>(vocab - 1));
    std::vector<TokenId> ids(n);
    for (auto& t : ids) t = dist(rng);
    return ids;
}

std::vector<SweepResult> sweep_pairs(const Model& model, const std::vector<PromptPair>& pairs, std::size_t* rejected) {
    std::vector<SweepResult> out;
    *rejected = 0;
    for (auto& o : sweep_all(model, pairs, {}, default_thread_count())) {
        if (o.result) {
            out.push_back(std::move(*o.result));
        } else {
            ++*rejected;
        }
    }
    return out;
}

void check_patch_identity(const Model& model) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(17);
    double worst = 0.0;
    const std::size_t vocab = model.config().vocab_size;
    for (int p = 0; p < 20; ++p) {
        const auto ids = random_ids(4 + p * 3, vocab, rng);
        const ForwardOutput clean = model.forward(ids);
        for (std::size_t l = 0; l < model.config().n_layers; ++l) {
            const Tensor x = model.capture(ids, model.hook(l));
            const ForwardOutput patched = model.forward_patched(ids, {model.hook(l), x});
            for (std::size_t i = 0; i < clean.logits.size(); ++i) {
                worst = std::max(worst, double(std::abs(clean.logits[i] - patched.logits[i])));
            }
        }
    }
    const double secs = seconds_since(t0);
    report("patch identity", worst <= 1e-5 && secs < 30.0,
           "max abs logit diff " + fmt(worst) + " over 20 prompts x " + std::to_string(model.config().n_layers) +
               " layers in " + fmt(secs) + " s");
}

void check_endpoints(const std::vector<SweepResult>& results, std::size_t rejected) {
    std::size_t bad = 0;
    double worst = 0.0;
    for (const auto& s : results) {
        double mx = 0.0;
        for (double d : s.d) mx = std::max(mx, d);
        worst = std::max(worst, s.d.front() / mx);
        if (s.d.front() > 1e-4 * mx || s.r.back() != 1.0) ++bad;
    }
    report("sweep endpoints", bad == 0 && results.size() + rejected == kPairs && !results.empty(),
           std::to_string(results.size()) + " pairs (" + std::to_string(rejected) + " degenerate), worst d[0]/max(d) " +
               fmt(worst) + ", " + std::to_string(bad) + " violations");
}

void check_slope_calibration() {
    const std::vector<double> alphas = alpha_grid(50);
    const double linear = max_slope(alphas, alphas);
    std::vector<double> step(50, 0.0);
    for (std::size_t i = 25; i < 50; ++i) step[i] = 1.0;
    const double jump = max_slope(step, alphas);
    report("slope calibration", std::abs(linear - 1.0) <= 1e-9 && std::abs(jump - 49.0) <= 1e-9,
           "linear " + fmt(linear) + ", single step " + fmt(jump));
}

void check_numerics() {
    ModelConfig tiny = train_preset("tiny", 97).model;
    tiny.max_seq_len = 16;
    std::mt19937_64 rng(5);
    const GradcheckReport grad = gradcheck(tiny, random_ids(12, 97, rng));

    double mm_worst = 0.0, l2_worst = 0.0;
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a({8, 8}), b({8, 8});
        for (std::size_t i = 0; i < 64; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        const Tensor out = matmul(a, b);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t j = 0; j < 8; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 8; ++k) acc += double(a.at(i, k)) * b.at(k, j);
                mm_worst = std::max(mm_worst, std::abs(out.at(i, j) - acc));
            }
        }
        Tensor x({64}), y({64});
        for (std::size_t i = 0; i < 64; ++i) {
            x[i] = u(rng);
            y[i] = u(rng);
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < 64; ++i) sq += (double(x[i]) - y[i]) * (double(x[i]) - y[i]);
        l2_worst = std::max(l2_worst, std::abs(l2_distance(x, y) - std::sqrt(sq)));
    }
    report("numerics", grad.passed() && !grad.entries.empty() && mm_worst <= 1e-6 && l2_worst <= 1e-6,
           "gradcheck max rel " + fmt(grad.max_rel_error()) + " over " + std::to_string(grad.entries.size()) +
               " entries, matmul " + fmt(mm_worst) + ", l2 " + fmt(l2_worst));
}

SliceImage render(const ModelConfig& config, const Checkpoint& ck, const SliceSpec& spec) {
    const Model model(config, ck.weights);
    return render_slice(model, spec, default_thread_count());
}

void check_slices(const ModelConfig& config, const std::vector<Checkpoint>& ckpts, const std::vector<PromptPair>& pool) {
    SliceSpec spec;
    spec.prompts = {pool[0].prompt_a, pool[0].prompt_b, pool[1].prompt_a};
    spec.n_alpha = 61;
    spec.n_beta = 61;

    bool corners_ok = true;
    std::ostringstream corners;
    for (const auto& ck : ckpts) {
        const SliceImage img = render(config, ck, spec);
        const auto [r0, c0] = img.nearest_pixel(0.0, 0.0);
        const auto [r1, c1] = img.nearest_pixel(1.0, 0.0);
        const auto [r2, c2] = img.nearest_pixel(img.projection_t, 1.0);
        const double red = img.rgb[img.index(r0, c0)][0];
        const double green = img.rgb[img.index(r1, c1)][1];
        const double blue = img.rgb[img.index(r2, c2)][2];
        const bool ok = red == 1.0 && green == 1.0 && blue == 1.0 && img.orthogonality_residual < 1e-5;
        corners_ok = corners_ok && ok;
        if (!ok || &ck == &ckpts.back()) {
            corners << " tok" << ck.tokens_seen << ": red " << fmt(red) << " green " << fmt(green) << " blue "
                    << fmt(blue) << " at alpha " << fmt(img.alphas[c2]) << " vs t " << fmt(img.projection_t)
                    << ", residual " << fmt(img.orthogonality_residual) << ";";
        }
    }
    report("slice corner saturation", corners_ok, std::to_string(ckpts.size()) + " checkpoints;" + corners.str());

    spec.n_alpha = 64;
    spec.n_beta = 64;
    const double first = slice_sharpness(render(config, ckpts.front(), spec));
    const double last = slice_sharpness(render(config, ckpts.back(), spec));
    report("slice sharpening", last > first, "sharpness " + fmt(first) + " at init, " + fmt(last) + " after training");
}

int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" RESPROBE_CLI_PATH "' " + args + " > cli.log 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void check_determinism() {
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    const fs::path root = fs::temp_directory_path() / "resprobe_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> steps = {
        "gen-corpus --chars 300000 --seed 4 --out corpus.txt",
        "train --preset micro --corpus corpus.txt --tokens 16384 --checkpoints 2 --seed 3 --out run",
        "sweep --weights run/ckpt_tok0000016384.rpw --corpus corpus.txt --n-pairs 20 --logit-diff --seed 2 --out sw",
        "sweep --weights run/ckpt_tok0000016384.rpw --fixtures --logit-diff --out fx",
        "aggregate sw/sweeps.jsonl fx/sweeps.jsonl --out agg",
        "slice --weights 'run/ckpt_*.rpw' --corpus corpus.txt --n-alpha 24 --n-beta 24 --out sl",
    };
    int rc = 0;
    for (const char* name : {"a", "b"}) {
        const fs::path dir = root / name;
        fs::create_directories(dir);
        for (const auto& s : steps) rc |= run_cli(dir, s);
    }
    std::size_t compared = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        const std::string ext = entry.path().extension().string();
        if (ext != ".json" && ext != ".jsonl" && ext != ".csv" && ext != ".ppm") continue;
        const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
        ++compared;
        if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
            ++differing;
            std::cout << "  differs: " << fs::relative(entry.path(), root / "a").string() << "\n";
        }
    }
    report("determinism", rc == 0 && compared >= 15 && differing == 0,
           std::to_string(compared) + " JSON/CSV/PPM outputs compared across two runs, " + std::to_string(differing) +
               " differ, exit status " + std::to_string(rc));
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    check_slope_calibration();
    check_numerics();

    const std::string text = synthetic_text(kCorpusChars, 0);
    const CharTokenizer tokenizer = CharTokenizer::from_text(text);
    const std::vector<TokenId> ids = tokenizer.encode(text);

    TrainConfig config = train_preset("tiny", tokenizer.vocab_size());
    config.total_tokens = kTrainTokens;
    config.seed = 1;
    config.checkpoint_tokens =
        log_spaced_marks(config.tokens_per_step(), kTrainTokens, kCheckpoints, config.tokens_per_step());
    const std::vector<Checkpoint> ckpts = train(config, ids);
    std::cout << "trained " << kTrainTokens << " tokens, " << ckpts.size() << " checkpoints including init, in "
              << fmt(seconds_since(t0)) << " s" << std::endl;

    const Model final_model(config.model, ckpts.back().weights);
    check_patch_identity(final_model);

    const std::vector<PromptPair> pairs = sample_pairs(ids, kPairs, 10, 0);
    std::vector<double> tokens, medians;
    std::vector<double> init_median_r, alphas;
    for (const auto& ck : ckpts) {
        const Model model(config.model, ck.weights);
        std::size_t rejected = 0;
        const std::vector<SweepResult> results = sweep_pairs(model, pairs, &rejected);
        if (&ck == &ckpts.back()) check_endpoints(results, rejected);
        const AggregateCurve agg = aggregate(results, rejected);
        tokens.push_back(static_cast<double>(ck.tokens_seen));
        medians.push_back(agg.median_max_slope);
        if (&ck == &ckpts.front()) {
            init_median_r = agg.median_r;
            alphas = agg.alphas;
        }
    }
    std::ostringstream seq;
    for (std::size_t i = 0; i < medians.size(); ++i) seq << (i ? " " : "") << fmt(medians[i]);
    const double ratio = medians.back() / medians.front();
    const double rho = spearman(tokens, medians);
    report("training emergence", ckpts.size() >= kCheckpoints && ratio >= 1.5 && rho > 0.6,
           "median max_slope [" + seq.str() + "], final/init " + fmt(ratio) + ", spearman " + fmt(rho));

    double sup = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) sup = std::max(sup, std::abs(init_median_r[i] - alphas[i]));
    report("random-init linearity", sup <= 0.15, "sup |median r - alpha| at init " + fmt(sup));

    check_slices(config.model, ckpts, sample_pairs(ids, 2, 10, 0));
    check_determinism();

    std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed") << " in "
              << fmt(seconds_since(t0)) << " s" << std::endl;
    return g_failures == 0 ? 0 : 1;
}
