// poqd: multi-vector retrieval with prompt-optimized query decomposition.
//
// Subcommands: index, decompose, retrieve, eval, optimize, train,
// theorem-check. Values come from built-in defaults, then the config file,
// then command-line flags. Exit codes: 1 usage, 2 config, 3 I/O,
// 4 remote transport, 5 invariant violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "poqd/config.hpp"
#include "poqd/corpus.hpp"
#include "poqd/decompose.hpp"
#include "poqd/errors.hpp"
#include "poqd/eval.hpp"
#include "poqd/mvr.hpp"
#include "poqd/optimizer.hpp"
#include "poqd/text.hpp"
#include "poqd/trainer.hpp"

namespace {

using namespace poqd;

bool uses_remote_backend(const RunConfig& cfg) {
    return cfg.embedder.kind == EmbedderKind::kRemote ||
           cfg.decomposer_llm.kind == LlmKind::kRemote ||
           cfg.optimizer_llm.kind == LlmKind::kRemote;
}

std::map<std::string, std::vector<std::string>> load_decompositions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open decompositions file '" + path + "'");
    std::map<std::string, std::vector<std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("id") || !record.contains("sub-queries")) {
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected a JSON object with 'id' and 'sub-queries'");
        }
        out[record["id"].get<std::string>()] =
            record["sub-queries"].get<std::vector<std::string>>();
    }
    return out;
}

void warn_fingerprint(const MultiVectorIndex& index, const EmbedderSpec& spec) {
    if (index.embedder_fingerprint != spec.fingerprint()) {
        std::cerr << "warning: index was built with embedder '" << index.embedder_fingerprint
                  << "' but the configured embedder is '" << spec.fingerprint() << "'\n";
    }
}

std::vector<TrainQuery> build_train_queries(
    const std::vector<std::pair<std::string, std::string>>& queries,
    const std::map<std::string, std::set<std::string>>& ground_truth) {
    std::vector<TrainQuery> out;
    for (const auto& [qid, text] : queries) {
        const auto gt = ground_truth.find(qid);
        if (gt == ground_truth.end()) {
            throw InvariantError("no ground truth for query '" + qid + "'");
        }
        out.push_back({qid, text, {gt->second.begin(), gt->second.end()}});
    }
    return out;
}

struct TrainSetup {
    std::unique_ptr<Embedder> embedder;
    std::optional<MultiVectorIndex> index;
    std::unique_ptr<DownstreamEvaluator> evaluator;
    std::unique_ptr<LlmClient> decomposer;
    std::unique_ptr<DecompositionCache> cache;
    std::vector<TrainQuery> queries;
    PromptPrefix p_init;
};

/// Shared assembly for optimize/train: evaluator, its data bindings, the
/// decomposer and the initial prefix. For synthetic runs with a scripted
/// optimizer and no configured script, the script walks the instance's
/// prompt table.
TrainSetup make_train_setup(RunConfig& cfg, const std::string& prefix_flag) {
    TrainSetup setup;
    if (cfg.evaluator == EvaluatorKind::kSyntheticPL) {
        SyntheticPLModel instance =
            make_synthetic_instance(cfg.seed, cfg.synthetic.n, cfg.synthetic.prompt_count);
        if (cfg.optimizer_llm.kind == LlmKind::kScriptedMock && cfg.optimizer_llm.script.empty()) {
            for (int p = 1; p < cfg.synthetic.prompt_count; ++p) {
                cfg.optimizer_llm.script.push_back("p" + std::to_string(p));
            }
        }
        setup.evaluator = std::make_unique<SyntheticPLEvaluator>(std::move(instance));
        setup.queries = {{"synthetic", "synthetic", {}}};
        setup.p_init = PromptPrefix{prefix_flag.empty() ? "p0" : prefix_flag};
    } else {
        if (cfg.paths.index.empty() || cfg.paths.queries.empty() ||
            cfg.paths.ground_truth.empty()) {
            throw ConfigError("retrieval-surrogate runs need [paths] index, queries "
                              "and ground-truth");
        }
        setup.index = load_index(cfg.paths.index);
        warn_fingerprint(*setup.index, cfg.embedder);
        cfg.embedder.dimension = setup.index->dimension;
        setup.embedder = make_embedder(cfg.embedder);
        setup.evaluator = std::make_unique<RetrievalSurrogateEvaluator>(
            *setup.index, *setup.embedder, cfg.surrogate_temperature);
        setup.queries = build_train_queries(load_id_text_jsonl(cfg.paths.queries),
                                            load_ground_truth(cfg.paths.ground_truth));
        setup.decomposer = std::make_unique<LlmClient>(cfg.decomposer_llm);
        if (!cfg.paths.cache.empty()) {
            setup.cache = std::make_unique<DecompositionCache>(cfg.paths.cache);
        }
        setup.p_init = PromptPrefix{prefix_flag.empty() ? kDefaultInitialPrefix : prefix_flag};
    }
    return setup;
}

void print_dry_run_plan(const char* command, const RunConfig& cfg, const std::string& log_path) {
    std::cout << "dry-run: " << command << " plan\n"
              << "  alpha: " << cfg.optimizer.alpha << "\n"
              << "  kappa: " << cfg.optimizer.kappa << " optimizer proposals per invocation\n"
              << "  tau: " << cfg.trainer.tau << " downstream steps per prompt update\n"
              << "  outer-cap: " << cfg.trainer.outer_loop_cap << "\n"
              << "  evaluator: "
              << (cfg.evaluator == EvaluatorKind::kSyntheticPL ? "synthetic-pl"
                                                               : "retrieval-surrogate")
              << "\n"
              << "  embedder: "
              << (cfg.embedder.kind == EmbedderKind::kRemote
                      ? "remote " + cfg.embedder.endpoint_url
                      : std::string("deterministic"))
              << " (d=" << cfg.embedder.dimension << ")\n"
              << "  decomposer llm: "
              << (cfg.decomposer_llm.kind == LlmKind::kRemote
                      ? "remote " + cfg.decomposer_llm.endpoint_url
                      : "scripted (" + std::to_string(cfg.decomposer_llm.script.size()) +
                            " responses)")
              << "\n"
              << "  optimizer llm: "
              << (cfg.optimizer_llm.kind == LlmKind::kRemote
                      ? "remote " + cfg.optimizer_llm.endpoint_url
                      : "scripted (" + std::to_string(cfg.optimizer_llm.script.size()) +
                            " responses)")
              << "\n"
              << "  seed: " << cfg.seed << "\n"
              << "  run log: " << (log_path.empty() ? "(none)" : log_path) << "\n"
              << "no network calls made\n";
}

int run(int argc, char** argv) {
    CLI::App app{"multi-vector retrieval with prompt-optimized query decomposition"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed_flag = 0;
    app.add_option("--config", config_path, "config file (INI sections)");
    auto* seed_opt = app.add_option("--seed", seed_flag, "global random seed");

    // index
    auto* cmd_index = app.add_subcommand("index", "segment, embed and persist a corpus");
    std::string index_corpus, index_out;
    int index_dimension = 0;
    cmd_index->add_option("--corpus", index_corpus, "corpus JSONL (id/text per line)")
        ->required();
    cmd_index->add_option("--out", index_out, "output index path")->required();
    cmd_index->add_option("--dimension", index_dimension, "embedding dimension override");

    // decompose
    auto* cmd_decompose = app.add_subcommand("decompose", "decompose queries into sub-queries");
    std::string dec_query, dec_queries_file, dec_out, dec_prefix;
    cmd_decompose->add_option("--query", dec_query, "single query text");
    cmd_decompose->add_option("--queries", dec_queries_file, "queries JSONL (id/text per line)");
    cmd_decompose->add_option("--out", dec_out, "output JSONL (stdout when omitted)");
    cmd_decompose->add_option("--prefix", dec_prefix, "prompt prefix override");

    // retrieve
    auto* cmd_retrieve = app.add_subcommand("retrieve", "top-k retrieval over an index");
    std::string ret_index, ret_queries, ret_decs;
    int ret_k = 0;
    cmd_retrieve->add_option("--index", ret_index, "index file");
    cmd_retrieve->add_option("--queries", ret_queries, "queries JSONL")->required();
    cmd_retrieve->add_option("--decompositions", ret_decs, "decompositions JSONL");
    cmd_retrieve->add_option("--k", ret_k, "retrieval depth");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "hit@k evaluation against ground truth");
    std::string ev_index, ev_queries, ev_gt, ev_decs, ev_out;
    int ev_k = 0;
    cmd_eval->add_option("--index", ev_index, "index file");
    cmd_eval->add_option("--queries", ev_queries, "queries JSONL")->required();
    cmd_eval->add_option("--ground-truth", ev_gt, "ground truth TSV");
    cmd_eval->add_option("--decompositions", ev_decs, "decompositions JSONL");
    cmd_eval->add_option("--k", ev_k, "retrieval depth");
    cmd_eval->add_option("--out", ev_out, "machine-readable report JSONL");

    // optimize
    auto* cmd_optimize = app.add_subcommand("optimize", "one round of prompt search");
    std::string opt_prefix, opt_log;
    bool opt_dry_run = false;
    double opt_alpha = -1.0;
    int opt_kappa = 0;
    cmd_optimize->add_option("--prefix", opt_prefix, "initial prompt prefix");
    cmd_optimize->add_option("--log", opt_log, "run log path override");
    cmd_optimize->add_option("--alpha", opt_alpha, "acceptance threshold override");
    cmd_optimize->add_option("--kappa", opt_kappa, "proposal budget override");
    cmd_optimize->add_flag("--dry-run", opt_dry_run, "print the plan, no LLM calls");

    // train
    auto* cmd_train = app.add_subcommand("train", "alternating prompt search and training");
    std::string tr_prefix, tr_log;
    bool tr_dry_run = false;
    int tr_tau = -1;
    cmd_train->add_option("--prefix", tr_prefix, "initial prompt prefix");
    cmd_train->add_option("--log", tr_log, "run log path override");
    cmd_train->add_option("--tau", tr_tau, "downstream steps per prompt update");
    cmd_train->add_flag("--dry-run", tr_dry_run, "print the plan, no LLM calls");

    // theorem-check
    auto* cmd_theorem = app.add_subcommand("theorem-check",
                                           "verify the convergence bound on seeded instances");
    SyntheticSuiteConfig suite;
    cmd_theorem->add_option("--seeds", suite.seeds, "number of seeded instances");
    cmd_theorem->add_option("--n-min", suite.n_min, "smallest model dimension");
    cmd_theorem->add_option("--n-max", suite.n_max, "largest model dimension");
    cmd_theorem->add_option("--alpha", suite.alpha, "acceptance threshold");
    cmd_theorem->add_option("--tau", suite.tau, "downstream steps per prompt update");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help text or the usage error
        return code == 0 ? 0 : 1;
    }

    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed_flag;

    if (cmd_index->parsed()) {
        if (index_dimension > 0) cfg.embedder.dimension = index_dimension;
        const auto docs = load_id_text_jsonl(index_corpus);
        const MultiVectorIndex index = build_index(docs, cfg.embedder);
        save_index(index, index_out);
        std::size_t segments = 0;
        for (const auto& d : index.documents) segments += d.segments.size();
        std::cout << "indexed " << index.documents.size() << " documents (" << segments
                  << " segments, dimension " << index.dimension << ") -> " << index_out << "\n";
        return 0;
    }

    if (cmd_decompose->parsed()) {
        if (dec_query.empty() == dec_queries_file.empty()) {
            throw UsageError("decompose: give exactly one of --query or --queries");
        }
        LlmClient client(cfg.decomposer_llm);
        const PromptPrefix prefix{dec_prefix.empty() ? kDefaultInitialPrefix : dec_prefix};
        DecompositionCache cache =
            cfg.paths.cache.empty() ? DecompositionCache{} : DecompositionCache{cfg.paths.cache};

        if (!dec_query.empty()) {
            auto cached = cache.find(prefix, dec_query);
            DecomposedQuery dq =
                cached ? *cached : decompose_query(client, prefix, dec_query, cfg.task_description);
            if (!cached) cache.put(dq);
            std::cout << join(dq.sub_queries, " | ") << "\n";
            return 0;
        }

        std::ofstream file_out;
        if (!dec_out.empty()) {
            file_out.open(dec_out, std::ios::trunc);
            if (!file_out) throw IoError("cannot open '" + dec_out + "' for writing");
        }
        std::ostream& out = dec_out.empty() ? std::cout : file_out;
        for (const auto& [qid, text] : load_id_text_jsonl(dec_queries_file)) {
            auto cached = cache.find(prefix, text);
            DecomposedQuery dq =
                cached ? *cached : decompose_query(client, prefix, text, cfg.task_description);
            if (!cached) cache.put(dq);
            out << nlohmann::json{{"id", qid},
                                  {"query", text},
                                  {"sub-queries", dq.sub_queries},
                                  {"filtered", dq.filtered},
                                  {"degraded", dq.degraded}}
                       .dump()
                << "\n";
        }
        return 0;
    }

    if (cmd_retrieve->parsed()) {
        const std::string index_path = ret_index.empty() ? cfg.paths.index : ret_index;
        if (index_path.empty()) throw UsageError("retrieve: --index is required");
        const MultiVectorIndex index = load_index(index_path);
        warn_fingerprint(index, cfg.embedder);
        cfg.embedder.dimension = index.dimension;
        auto embedder = make_embedder(cfg.embedder);
        const int k = ret_k > 0 ? ret_k : cfg.retrieval_k;

        std::map<std::string, std::vector<std::string>> decs;
        if (!ret_decs.empty()) decs = load_decompositions(ret_decs);

        for (const auto& [qid, text] : load_id_text_jsonl(ret_queries)) {
            std::vector<std::string> sub_queries{text};
            if (const auto it = decs.find(qid); it != decs.end()) sub_queries = it->second;
            const auto ranked = top_k_retrieve(index, embedder->embed(sub_queries), k);
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                char line[512];
                std::snprintf(line, sizeof(line), "%s\t%zu\t%s\t%.6f\n", qid.c_str(), r + 1,
                              ranked[r].doc_id.c_str(), ranked[r].score);
                std::cout << line;
            }
        }
        return 0;
    }

    if (cmd_eval->parsed()) {
        const std::string index_path = ev_index.empty() ? cfg.paths.index : ev_index;
        const std::string gt_path = ev_gt.empty() ? cfg.paths.ground_truth : ev_gt;
        if (index_path.empty()) throw UsageError("eval: --index is required");
        if (gt_path.empty()) throw UsageError("eval: --ground-truth is required");
        const MultiVectorIndex index = load_index(index_path);
        warn_fingerprint(index, cfg.embedder);
        cfg.embedder.dimension = index.dimension;
        auto embedder = make_embedder(cfg.embedder);
        const int k = ev_k > 0 ? ev_k : cfg.retrieval_k;

        std::map<std::string, std::vector<std::string>> decs;
        if (!ev_decs.empty()) decs = load_decompositions(ev_decs);

        const MetricsReport report = evaluate_run(index, *embedder,
                                                  load_id_text_jsonl(ev_queries), decs,
                                                  load_ground_truth(gt_path), k);
        std::cout << format_metrics_table(report);
        if (!ev_out.empty()) {
            std::ofstream out(ev_out, std::ios::trunc);
            if (!out) throw IoError("cannot open '" + ev_out + "' for writing");
            out << format_metrics_jsonl(report);
        }
        return 0;
    }

    if (cmd_optimize->parsed()) {
        if (opt_alpha > 0.0) cfg.optimizer.alpha = opt_alpha;
        if (opt_kappa > 0) cfg.optimizer.kappa = opt_kappa;
        const std::string log_path = !opt_log.empty() ? opt_log : cfg.paths.log;
        if (opt_dry_run) {
            print_dry_run_plan("optimize", cfg, log_path);
            return 0;
        }
        TrainSetup setup = make_train_setup(cfg, opt_prefix);
        LlmClient optimizer_llm(cfg.optimizer_llm);
        RunLog log;
        if (!log_path.empty()) log = RunLog::to_file(log_path, !uses_remote_backend(cfg));

        const OptimizeResult result =
            optimize_prompt(cfg.optimizer, setup.p_init, setup.queries, *setup.evaluator,
                            optimizer_llm, setup.decomposer.get(), setup.cache.get(), &log,
                            cfg.task_description);
        std::cout << (result.updated ? "updated" : "unchanged")
                  << " prefix: " << result.prefix.text << "\n"
                  << "proposals: " << result.proposals << "\n";
        for (const auto& pair : result.history.pairs) {
            char line[512];
            std::snprintf(line, sizeof(line), "  loss %.6f  prefix %s\n", pair.loss,
                          pair.prefix.text.c_str());
            std::cout << line;
        }
        return 0;
    }

    if (cmd_train->parsed()) {
        if (tr_tau >= 0) cfg.trainer.tau = tr_tau;
        const std::string log_path = !tr_log.empty() ? tr_log : cfg.paths.log;
        if (tr_dry_run) {
            print_dry_run_plan("train", cfg, log_path);
            return 0;
        }
        TrainSetup setup = make_train_setup(cfg, tr_prefix);
        LlmClient optimizer_llm(cfg.optimizer_llm);
        RunLog log;
        if (!log_path.empty()) log = RunLog::to_file(log_path, !uses_remote_backend(cfg));

        const TrainResult result =
            train_poqd(cfg.trainer, cfg.optimizer, setup.p_init, setup.queries, *setup.evaluator,
                       optimizer_llm, setup.decomposer.get(), setup.cache.get(), &log);
        char final_loss[64];
        std::snprintf(final_loss, sizeof(final_loss), "%.10g", result.final_loss);
        std::cout << "final prefix: " << result.final_prefix.text << "\n"
                  << "accepted updates: " << result.accepted_updates.size() << "\n"
                  << "outer iterations: " << result.outer_iterations << "\n"
                  << "optimizer proposals: " << result.optimizer_proposals << "\n"
                  << "gd steps (alternating/full): " << result.alternating_gd_steps << "/"
                  << result.full_train_steps
                  << (result.full_train_converged ? "" : " (iteration cap reached)") << "\n"
                  << "final loss: " << final_loss << "\n";
        if (result.outer_cap_hit) std::cout << "outer loop cap reached\n";
        return 0;
    }

    if (cmd_theorem->parsed()) {
        suite.base_seed = cfg.seed == 0 ? 1 : cfg.seed;
        RunLog log;
        if (!cfg.paths.log.empty()) log = RunLog::to_file(cfg.paths.log, true);
        const SyntheticSuiteResult result = run_theorem_suite(suite, &log);
        std::cout << result.bound_satisfied << "/" << result.total << " bound-satisfied\n";
        long long steps = 0;
        for (const auto& r : result.runs) steps += r.lemma_steps_checked;
        std::cout << result.lemma_satisfied << "/" << result.total << " lemma-satisfied ("
                  << steps << " gd steps checked)\n";
        if (!result.all_hold()) {
            throw InvariantError("convergence bound or linear-rate check failed");
        }
        return 0;
    }

    throw UsageError("no subcommand given");
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const poqd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return poqd::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
}
