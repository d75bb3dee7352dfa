// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "resprobe/corpus.hpp"
#include "resprobe/error.hpp"
#include "resprobe/parallel.hpp"
#include "resprobe/probe.hpp"
#include "resprobe/slice.hpp"
#include "resprobe/tokenizer.hpp"
#include "resprobe/trainer.hpp"
#include "resprobe/weights_io.hpp"
#include "run_manifest.hpp"

namespace resprobe::cli {

namespace {

using nlohmann::json;

std::size_t resolve_threads(std::size_t flag) {
    return flag > 0 ? flag : default_thread_count();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path.string());
}

struct LoadedTokenizer {
    std::unique_ptr<Tokenizer> tokenizer;
    std::vector<fs::path> files;
};

LoadedTokenizer resolve_tokenizer(const TokenizerFlags& flags, const fs::path& weights) {
    fs::path vocab;
    if (flags.vocab) {
        vocab = *flags.vocab;
    } else {
        vocab = weights.parent_path() / "tokenizer.txt";
        if (!fs::exists(vocab)) {
            throw InputError("no --tokenizer given and no tokenizer.txt next to " + weights.string());
        }
    }
    require_file(vocab, "tokenizer vocabulary");
    LoadedTokenizer out;
    out.files.push_back(vocab);
    if (flags.merges) {
        require_file(*flags.merges, "BPE merges file");
        out.files.push_back(*flags.merges);
    }
    out.tokenizer = load_tokenizer(vocab, flags.merges);
    return out;
}

std::string format_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string checkpoint_name(std::uint64_t tokens) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "ckpt_tok%010llu.rpw", static_cast<unsigned long long>(tokens));
    return buf;
}

json tokenizer_params(const TokenizerFlags& flags, const LoadedTokenizer& tok) {
    json j;
    j["vocab"] = tok.files.front().string();
    j["merges"] = flags.merges ? json(flags.merges->string()) : json();
    j["vocab_size"] = tok.tokenizer->vocab_size();
    return j;
}

std::optional<std::uint64_t> checkpoint_tokens(const WeightFile& f) {
    if (f.metadata.contains("tokens_seen") && f.metadata["tokens_seen"].is_number_unsigned()) {
        return f.metadata["tokens_seen"].get<std::uint64_t>();
    }
    return std::nullopt;
}

}  // namespace

std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns) {
    std::vector<fs::path> out;
    for (const auto& pattern : patterns) {
        const fs::path p(pattern);
        const std::string name = p.filename().string();
        if (name.find_first_of("*?[") == std::string::npos) {
            out.push_back(p);
            continue;
        }
        const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
        std::vector<fs::path> matches;
        if (fs::is_directory(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (!entry.is_regular_file()) continue;
                const std::string candidate = entry.path().filename().string();
                if (fnmatch(name.c_str(), candidate.c_str(), FNM_PERIOD) == 0) {
                    matches.push_back(p.has_parent_path() ? dir / candidate : fs::path(candidate));
                }
            }
        }
        if (matches.empty()) throw InputError("pattern matched no files: " + pattern);
        std::sort(matches.begin(), matches.end());
        out.insert(out.end(), matches.begin(), matches.end());
    }
    return out;
}

int cmd_gen_corpus(const GenCorpusFlags& flags) {
    if (flags.chars == 0) throw InputError("--chars must be positive");
    if (flags.out.has_parent_path()) ensure_dir(flags.out.parent_path());
    const std::string text = synthetic_text(flags.chars, flags.seed);
    std::ofstream os(flags.out, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open " + flags.out.string() + " for writing");
    os << text;
    std::cout << "wrote " << text.size() << " bytes to " << flags.out.string() << '\n';
    return kExitOk;
}

int cmd_train(const TrainFlags& flags) {
    ensure_dir(flags.out);
    RunManifest manifest = make_manifest("train", flags.seed);

    std::string text;
    if (flags.corpus) {
        if (!fs::exists(*flags.corpus)) throw InputError("corpus not found: " + flags.corpus->string());
        Corpus corpus = load_corpus(*flags.corpus);
        for (const auto& f : corpus.files) manifest.add_input(f);
        text = std::move(corpus.text);
    } else {
        text = synthetic_text(flags.synthetic_chars, flags.seed);
    }

    std::unique_ptr<Tokenizer> tokenizer;
    fs::path tokenizer_path = flags.out / "tokenizer.txt";
    if (flags.tokenizer.vocab) {
        require_file(*flags.tokenizer.vocab, "tokenizer vocabulary");
        tokenizer = load_tokenizer(*flags.tokenizer.vocab, flags.tokenizer.merges);
        manifest.add_input(*flags.tokenizer.vocab);
        if (tokenizer->kind() == TokenizerKind::char_level) {
            static_cast<const CharTokenizer&>(*tokenizer).save(tokenizer_path);
        }
    } else {
        auto chars = std::make_unique<CharTokenizer>(CharTokenizer::from_text(text));
        chars->save(tokenizer_path);
        tokenizer = std::move(chars);
    }
    const std::vector<TokenId> ids = tokenizer->encode(text);

    TrainConfig config = train_preset(flags.preset, tokenizer->vocab_size());
    if (flags.learning_rate) config.learning_rate = *flags.learning_rate;
    if (flags.batch_size) config.batch_size = *flags.batch_size;
    config.total_tokens = flags.tokens;
    config.seed = flags.seed;
    if (flags.checkpoints == 0) throw InputError("--checkpoints must be positive");
    if (config.total_tokens == 0 || config.total_tokens % config.tokens_per_step() != 0) {
        throw InputError("--tokens must be a positive multiple of " + std::to_string(config.tokens_per_step()));
    }
    const std::uint64_t first = flags.first_mark > 0 ? flags.first_mark : config.tokens_per_step();
    config.checkpoint_tokens = log_spaced_marks(first, config.total_tokens, flags.checkpoints, config.tokens_per_step());
    config.validate();

    manifest.parameters = {
        {"preset", flags.preset},
        {"corpus", flags.corpus ? json(flags.corpus->string()) : json()},
        {"synthetic_chars", flags.corpus ? json() : json(flags.synthetic_chars)},
        {"corpus_tokens", ids.size()},
        {"model", config.model},
        {"seq_len", config.seq_len},
        {"batch_size", config.batch_size},
        {"total_tokens", config.total_tokens},
        {"learning_rate", config.learning_rate},
        {"warmup_steps", config.warmup_steps},
        {"checkpoint_tokens", config.checkpoint_tokens},
        {"out", flags.out.string()},
    };

    std::ofstream log(flags.out / "train_log.csv", std::ios::binary | std::ios::trunc);
    if (!log) throw InputError("cannot write train_log.csv in " + flags.out.string());
    log << "step,tokens_seen,loss,lr\n";

    json index = json::array();
    TrainCallbacks callbacks;
    callbacks.keep_checkpoints = false;
    callbacks.on_step = [&](const TrainLogRow& row) {
        log << row.step << ',' << row.tokens_seen << ',' << format_num(row.loss) << ',' << format_num(row.lr) << '\n';
    };
    callbacks.on_checkpoint = [&](const Checkpoint& cp) {
        if (!std::isfinite(cp.loss_at_save)) {
            throw DivergenceError("held-out loss is not finite at " + std::to_string(cp.tokens_seen) + " tokens");
        }
        const std::string name = checkpoint_name(cp.tokens_seen);
        save_rpw(flags.out / name, config.model, cp.weights,
                 {{"tokens_seen", cp.tokens_seen},
                  {"loss_at_save", cp.loss_at_save},
                  {"seed", flags.seed},
                  {"preset", flags.preset}});
        index.push_back({{"file", name}, {"tokens_seen", cp.tokens_seen}, {"loss_at_save", cp.loss_at_save}});
        std::cout << "checkpoint " << name << "  held-out loss " << format_num(cp.loss_at_save) << std::endl;
    };
    train(config, ids, callbacks);

    write_json_file(flags.out / "checkpoints.json", index);
    manifest.write(flags.out);
    return kExitOk;
}

int cmd_sweep(const SweepFlags& flags) {
    const int sources = (flags.pairs ? 1 : 0) + (flags.fixtures ? 1 : 0) + (flags.corpus ? 1 : 0);
    if (sources != 1) throw InputError("give exactly one of --pairs, --fixtures or --corpus");
    require_file(flags.weights, "weight file");
    const LoadedTokenizer tok = resolve_tokenizer(flags.tokenizer, flags.weights);

    RunManifest manifest = make_manifest("sweep", flags.seed);
    manifest.add_input(flags.weights);
    for (const auto& f : tok.files) manifest.add_input(f);

    WeightFile file = load_rpw(flags.weights);
    const Model model(std::move(file.config), std::move(file.weights));
    model.hook(flags.layer);
    if (flags.points < 2) throw InputError("--points must be at least 2");

    std::vector<PromptPair> pairs;
    if (flags.pairs) {
        require_file(*flags.pairs, "pair manifest");
        manifest.add_input(*flags.pairs);
        std::ifstream is(*flags.pairs);
        json j;
        try {
            j = json::parse(is);
        } catch (const json::parse_error& e) {
            throw FormatError("pair manifest " + flags.pairs->string() + ": " + e.what());
        }
        pairs = pairs_from_manifest(j);
    } else if (flags.fixtures) {
        const auto texts = fixture_prompts();
        pairs = tokenize_pairs(texts, *tok.tokenizer);
    } else {
        if (!fs::exists(*flags.corpus)) throw InputError("corpus not found: " + flags.corpus->string());
        const Corpus corpus = load_corpus(*flags.corpus);
        for (const auto& f : corpus.files) manifest.add_input(f);
        pairs = sample_pairs(corpus, *tok.tokenizer, flags.n_pairs, flags.token_len, flags.seed, flags.min_separation);
    }

    ensure_dir(flags.out);
    const std::size_t threads = resolve_threads(flags.threads);
    manifest.parameters = {
        {"weights", flags.weights.string()},
        {"tokenizer", tokenizer_params(flags.tokenizer, tok)},
        {"source", flags.pairs ? "pairs" : flags.fixtures ? "fixtures" : "corpus"},
        {"pairs", flags.pairs ? json(flags.pairs->string()) : json()},
        {"corpus", flags.corpus ? json(flags.corpus->string()) : json()},
        {"n_pairs", pairs.size()},
        {"token_len", flags.corpus ? json(flags.token_len) : json()},
        {"min_separation", flags.corpus ? json(flags.min_separation) : json()},
        {"layer", flags.layer},
        {"points", flags.points},
        {"logit_diff", flags.logit_diff},
        {"threads", threads},
        {"out", flags.out.string()},
    };

    write_json_file(flags.out / "pairs.json", pairs_manifest(pairs));
    SweepOptions options;
    options.layer = flags.layer;
    options.n_points = flags.points;
    options.logit_diff = flags.logit_diff;
    const auto outcomes = sweep_all(model, pairs, options, threads);

    std::vector<SweepResult> results;
    json rejected = json::array();
    for (const auto& o : outcomes) {
        if (o.result) {
            results.push_back(*o.result);
        } else {
            rejected.push_back({{"label", o.label}, {"error", o.error}});
            std::cerr << "rejected pair " << o.label << ": " << o.error << '\n';
        }
    }
    write_sweeps_jsonl(flags.out / "sweeps.jsonl", results);
    write_curves_csv(flags.out / "curves.csv", results);
    write_json_file(flags.out / "rejected.json", rejected);
    if (results.empty()) {
        manifest.write(flags.out);
        std::cerr << "every pair was degenerate\n";
        return kExitDegenerate;
    }
    const AggregateCurve curve = aggregate(results, rejected.size());
    write_json_file(flags.out / "aggregate.json", to_json(curve));
    write_aggregate_csv(flags.out / "aggregate.csv", curve);
    manifest.write(flags.out);
    std::cout << results.size() << " sweeps, " << rejected.size() << " rejected; median max_slope "
              << format_num(curve.median_max_slope) << " (q25 " << format_num(curve.q25_max_slope) << ", q75 "
              << format_num(curve.q75_max_slope) << ")\n";
    return kExitOk;
}

int cmd_slice(const SliceFlags& flags) {
    if (flags.weights.empty()) throw InputError("--weights is required");
    const auto weight_files = expand_globs(flags.weights);
    for (const auto& w : weight_files) require_file(w, "weight file");
    if (flags.alpha_range.size() != 2 || flags.beta_range.size() != 2) {
        throw InputError("--alpha-range and --beta-range take two values: lo hi");
    }
    const LoadedTokenizer tok = resolve_tokenizer(flags.tokenizer, weight_files.front());

    RunManifest manifest = make_manifest("slice", flags.seed);
    for (const auto& w : weight_files) manifest.add_input(w);
    for (const auto& f : tok.files) manifest.add_input(f);

    SliceSpec spec;
    if (flags.corpus) {
        if (!flags.prompts.empty()) throw InputError("give either --prompt three times or --corpus, not both");
        if (!fs::exists(*flags.corpus)) throw InputError("corpus not found: " + flags.corpus->string());
        const Corpus corpus = load_corpus(*flags.corpus);
        for (const auto& f : corpus.files) manifest.add_input(f);
        const auto pairs = sample_pairs(corpus, *tok.tokenizer, 2, flags.token_len, flags.seed, flags.min_separation);
        spec.prompts = {pairs[0].prompt_a, pairs[0].prompt_b, pairs[1].prompt_a};
    } else {
        if (flags.prompts.size() != 3) throw InputError("slice needs exactly three --prompt values (A, B, C)");
        for (std::size_t i = 0; i < 3; ++i) spec.prompts[i].ids = tok.tokenizer->encode(flags.prompts[i]);
    }
    spec.layer = flags.layer;
    spec.n_alpha = flags.n_alpha;
    spec.n_beta = flags.n_beta;
    spec.alpha_range = {flags.alpha_range[0], flags.alpha_range[1]};
    spec.beta_range = {flags.beta_range[0], flags.beta_range[1]};
    spec.validate();

    ensure_dir(flags.out);
    const std::size_t threads = resolve_threads(flags.threads);
    json files = json::array();
    for (const auto& w : weight_files) files.push_back(w.string());
    manifest.parameters = {
        {"weights", files},
        {"tokenizer", tokenizer_params(flags.tokenizer, tok)},
        {"prompts", flags.prompts},
        {"prompt_ids", {spec.prompts[0].ids, spec.prompts[1].ids, spec.prompts[2].ids}},
        {"corpus", flags.corpus ? json(flags.corpus->string()) : json()},
        {"layer", spec.layer},
        {"n_alpha", spec.n_alpha},
        {"n_beta", spec.n_beta},
        {"alpha_range", flags.alpha_range},
        {"beta_range", flags.beta_range},
        {"threads", threads},
        {"out", flags.out.string()},
    };

    struct Job {
        fs::path path;
        WeightFile file;
        std::string tag;
    };
    std::vector<Job> jobs;
    for (const auto& w : weight_files) {
        Job job{w, load_rpw(w), {}};
        const auto tokens = checkpoint_tokens(job.file);
        job.tag = tokens ? std::to_string(*tokens) : w.stem().string();
        jobs.push_back(std::move(job));
    }

    for (auto& job : jobs) {
        const auto tokens = checkpoint_tokens(job.file);
        const Model model(std::move(job.file.config), std::move(job.file.weights));
        SliceImage image = render_slice(model, spec, threads);
        image.checkpoint_tokens = tokens;
        const std::string stem = "slice_L" + std::to_string(spec.layer) + "_tok" + job.tag;
        write_ppm(image, flags.out / (stem + ".ppm"));
        json sidecar = slice_sidecar(image);
        sidecar["weights"] = job.path.string();
        write_json_file(flags.out / (stem + ".json"), sidecar);
        std::cout << stem << ".ppm  t=" << format_num(image.projection_t) << "  orthogonality "
                  << format_num(image.orthogonality_residual) << "  sharpness "
                  << format_num(slice_sharpness(image)) << '\n';
    }
    manifest.write(flags.out);
    return kExitOk;
}

int cmd_aggregate(const AggregateFlags& flags) {
    if (flags.inputs.empty()) throw InputError("aggregate needs at least one sweep file");
    RunManifest manifest = make_manifest("aggregate", 0);
    std::vector<SweepResult> all;
    json inputs = json::array();
    for (const auto& path : flags.inputs) {
        require_file(path, "sweep file");
        manifest.add_input(path);
        inputs.push_back(path.string());
        auto part = read_sweep_file(path);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    const AggregateCurve curve = aggregate(all);
    ensure_dir(flags.out);
    manifest.parameters = {{"inputs", inputs}, {"n_sweeps", all.size()}, {"out", flags.out.string()}};
    write_json_file(flags.out / "aggregate.json", to_json(curve));
    write_aggregate_csv(flags.out / "aggregate.csv", curve);
    manifest.write(flags.out);
    std::cout << all.size() << " sweeps; median max_slope " << format_num(curve.median_max_slope) << '\n';
    return kExitOk;
}

int cmd_gradcheck(const GradcheckFlags& flags) {
    if (flags.seq_len < 1) throw InputError("--seq-len must be positive");
    const std::string text = synthetic_text(4000, flags.seed);
    const CharTokenizer tokenizer = CharTokenizer::from_text(text);
    ModelConfig config = train_preset(flags.preset, tokenizer.vocab_size()).model;
    config.max_seq_len = flags.seq_len;
    auto ids = tokenizer.encode(text);
    ids.resize(flags.seq_len + 1);

    GradcheckOptions options;
    options.samples_per_param = flags.samples;
    options.tolerance = flags.tolerance;
    options.seed = flags.seed;
    const GradcheckReport report = gradcheck(config, ids, options);

    std::map<std::string, double> worst;
    for (const auto& e : report.entries) worst[e.param] = std::max(worst[e.param], e.rel_error);
    for (const auto& [name, err] : worst) {
        std::cout << (err <= report.tolerance ? "ok   " : "FAIL ") << name << "  max rel error " << format_num(err) << '\n';
    }
    std::cout << "max rel error " << format_num(report.max_rel_error()) << " over " << report.entries.size()
              << " entries (tolerance " << format_num(report.tolerance) << ")\n";
    if (!report.passed()) {
        std::cerr << "gradient mismatch in " << report.first_failure() << '\n';
        return kExitDegenerate;
    }
    return kExitOk;
}

int cmd_check_fixture(const CheckFixtureFlags& flags) {
    require_file(flags.weights, "weight file");
    require_file(flags.fixture, "fixture file");
    const Model model = load_model(flags.weights);
    std::unique_ptr<Tokenizer> tokenizer;
    if (flags.tokenizer.vocab) tokenizer = resolve_tokenizer(flags.tokenizer, flags.weights).tokenizer;

    std::ifstream is(flags.fixture);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw FormatError("fixture " + flags.fixture.string() + ": " + e.what());
    }
    const json& entries = j.is_array() ? j : j.contains("prompts") ? j.at("prompts") : j.at("entries");
    if (!entries.is_array() || entries.empty()) throw FormatError("fixture holds no prompt entries");

    bool all_ok = true;
    double worst = 0.0;
    std::size_t index = 0;
    for (const auto& e : entries) {
        const std::string label = e.value("label", "#" + std::to_string(index));
        ++index;
        std::vector<TokenId> ids;
        int expected_top = 0;
        std::vector<std::pair<TokenId, double>> top;
        try {
            ids = e.at("ids").get<std::vector<TokenId>>();
            expected_top = e.at("top_prediction").get<int>();
            for (const auto& item : e.at("top100")) top.emplace_back(item.at(0).get<TokenId>(), item.at(1).get<double>());
        } catch (const json::exception& ex) {
            throw FormatError("fixture entry " + label + ": " + ex.what());
        }
        bool ok = true;
        std::string why;
        if (tokenizer && e.contains("text")) {
            if (tokenizer->encode(e["text"].get<std::string>()) != ids) {
                ok = false;
                why += " token-ids-differ";
            }
        }
        const ForwardOutput out = model.forward(ids);
        const TokenId got_top = top_prediction(out.logits.data());
        if (got_top != expected_top) {
            ok = false;
            why += " top-prediction " + std::to_string(got_top) + "!=" + std::to_string(expected_top);
        }
        double max_abs = 0.0;
        for (const auto& [id, logit] : top) {
            if (id < 0 || static_cast<std::size_t>(id) >= out.logits.size()) {
                throw FormatError("fixture entry " + label + " names token " + std::to_string(id) + " outside the vocabulary");
            }
            max_abs = std::max(max_abs, std::abs(static_cast<double>(out.logits[static_cast<std::size_t>(id)]) - logit));
        }
        if (max_abs > flags.tolerance) {
            ok = false;
            why += " logits";
        }
        worst = std::max(worst, max_abs);
        all_ok = all_ok && ok;
        std::cout << (ok ? "ok   " : "FAIL ") << label << "  top " << got_top << "  max abs logit error "
                  << format_num(max_abs) << why << '\n';
    }
    std::cout << (all_ok ? "fixture matches" : "fixture MISMATCH") << "; worst max abs " << format_num(worst) << '\n';
    return all_ok ? kExitOk : kExitDegenerate;
}

}  // namespace resprobe::cli
