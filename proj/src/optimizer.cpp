#include "poqd/optimizer.hpp"

#include <algorithm>
#include <cstdio>

#include "poqd/errors.hpp"
#include "poqd/text.hpp"

namespace poqd {

const char* const kDefaultMetaPromptHeader =
    "You are optimizing the instruction prefix given to a query decomposition "
    "assistant. Below are previously tried prefixes and the training loss each one "
    "achieved.";

const char* const kDefaultMetaPromptFooter =
    "Lower score is better. Propose a new prefix that is different from every prefix "
    "above and that you expect to achieve a lower score. Reply with the new prefix "
    "text only.";

void OptimizerConfig::validate() const {
    if (alpha <= 0.0) throw ConfigError("optimizer alpha must be > 0");
    if (kappa < 1) throw ConfigError("optimizer kappa must be >= 1");
}

std::string render_meta_prompt(const OptimizerConfig& config, const SolutionScoreList& history) {
    if (history.pairs.empty()) {
        throw InvariantError("render_meta_prompt: history is empty");
    }
    std::vector<const SolutionScorePair*> ordered;
    ordered.reserve(history.pairs.size());
    for (const auto& p : history.pairs) ordered.push_back(&p);
    // Best (lowest loss) last; ties keep generation order.
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const SolutionScorePair* a, const SolutionScorePair* b) {
                         return a->loss > b->loss;
                     });

    std::string out = config.meta_prompt_header;
    for (const auto* pair : ordered) {
        char score[32];
        std::snprintf(score, sizeof(score), "%.4f", pair->loss);
        out += "\n\nSolution: " + pair->prefix.text + "\nScore: " + score;
    }
    out += "\n\n" + config.meta_prompt_footer;
    return out;
}

namespace {

[[noreturn]] void rethrow_with_prefix(const std::string& prefix_text) {
    const std::string ctx = "evaluating prefix '" + prefix_text + "': ";
    try {
        throw;
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + e.what());
    } catch (const IoError& e) {
        throw IoError(ctx + e.what());
    } catch (const ProtocolError& e) {
        throw ProtocolError(ctx + e.what());
    } catch (const TransportError& e) {
        throw TransportError(ctx + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError(ctx + e.what());
    } catch (const std::exception& e) {
        throw Error(ctx + e.what());
    }
}

} // namespace

double evaluate_prefix_loss(const PromptPrefix& prefix, const std::vector<TrainQuery>& queries,
                            DownstreamEvaluator& evaluator, LlmClient* decomposer,
                            DecompositionCache* cache,
                            std::map<std::string, DecomposedQuery>* decompositions_out,
                            const std::string& task_description) {
    if (queries.empty()) {
        throw InvariantError("evaluate_prefix_loss: training query list is empty");
    }
    const bool needs = evaluator.needs_decompositions();
    if (needs && decomposer == nullptr) {
        throw ConfigError("evaluate_prefix_loss: evaluator needs decompositions "
                          "but no decomposer LLM was given");
    }

    double total = 0.0;
    for (const auto& q : queries) {
        std::vector<std::string> sub_queries{q.text};
        if (needs) {
            DecomposedQuery dq;
            if (cache != nullptr) {
                if (auto hit = cache->find(prefix, q.text)) {
                    dq = std::move(*hit);
                } else {
                    dq = decompose_query(*decomposer, prefix, q.text, task_description);
                    cache->put(dq);
                }
            } else {
                dq = decompose_query(*decomposer, prefix, q.text, task_description);
            }
            sub_queries = dq.sub_queries;
            if (decompositions_out != nullptr) {
                (*decompositions_out)[q.id] = std::move(dq);
            }
        }
        try {
            total += evaluator.query_loss(q, sub_queries, prefix);
        } catch (...) {
            rethrow_with_prefix(prefix.text);
        }
    }
    return total / static_cast<double>(queries.size());
}

OptimizeResult optimize_prompt(const OptimizerConfig& config, const PromptPrefix& p_old,
                               const std::vector<TrainQuery>& queries,
                               DownstreamEvaluator& evaluator, LlmClient& optimizer_llm,
                               LlmClient* decomposer, DecompositionCache* cache, RunLog* log,
                               const std::string& task_description) {
    config.validate();
    if (trim(p_old.text).empty()) {
        throw InvariantError("optimize_prompt: initial prefix is empty");
    }

    std::map<std::string, std::map<std::string, DecomposedQuery>> decs_by_prefix;

    OptimizeResult result;
    const double loss_old = evaluate_prefix_loss(p_old, queries, evaluator, decomposer, cache,
                                                 &decs_by_prefix[p_old.text], task_description);
    result.history.pairs.push_back({p_old, loss_old});
    if (log != nullptr) log->opt_iter(0, p_old.text, loss_old, false, true);

    auto in_history = [&](const std::string& text) {
        for (const auto& pair : result.history.pairs) {
            if (pair.prefix.text == text) return true;
        }
        return false;
    };

    for (int iteration = 1; iteration <= config.kappa; ++iteration) {
        result.proposals = iteration;

        std::string proposal;
        try {
            proposal = trim(optimizer_llm.complete(render_meta_prompt(config, result.history)));
        } catch (const TransportError&) {
            if (log != nullptr) log->opt_iter(iteration, "", nullptr, false, false);
            continue;
        }
        if (proposal.empty() || in_history(proposal)) {
            // Consumed iteration, nothing to evaluate.
            if (log != nullptr) log->opt_iter(iteration, proposal, nullptr, false, false);
            continue;
        }

        const PromptPrefix candidate{proposal};
        const double loss_new =
            evaluate_prefix_loss(candidate, queries, evaluator, decomposer, cache,
                                 &decs_by_prefix[proposal], task_description);
        result.history.pairs.push_back({candidate, loss_new});

        const bool accepted = (loss_old - loss_new) >= config.alpha;
        if (log != nullptr) log->opt_iter(iteration, proposal, loss_new, accepted, true);
        if (accepted) {
            result.prefix = candidate;
            result.updated = true;
            result.decompositions = std::move(decs_by_prefix[proposal]);
            return result;
        }
    }

    result.prefix = p_old;
    result.updated = false;
    result.decompositions = std::move(decs_by_prefix[p_old.text]);
    return result;
}

} // namespace poqd
