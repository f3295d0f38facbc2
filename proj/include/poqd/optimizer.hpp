#pragma once

#include <map>
#include <string>
#include <vector>

#include "poqd/decompose.hpp"
#include "poqd/llm_client.hpp"
#include "poqd/run_log.hpp"

namespace poqd {

struct SolutionScorePair {
    PromptPrefix prefix;
    double loss = 0.0;
};

/// Evaluated (prefix, loss) pairs in generation order; entry 0 is the
/// incumbent prefix the optimization started from.
struct SolutionScoreList {
    std::vector<SolutionScorePair> pairs;
};

extern const char* const kDefaultMetaPromptHeader;
extern const char* const kDefaultMetaPromptFooter;

struct OptimizerConfig {
    double alpha = 0.02; ///< loss improvement required to accept a proposal
    int kappa = 5;       ///< max optimizer proposals per invocation
    std::string meta_prompt_header = kDefaultMetaPromptHeader;
    std::string meta_prompt_footer = kDefaultMetaPromptFooter;

    void validate() const;
};

struct TrainQuery {
    std::string id;
    std::string text;
    std::vector<std::string> gold_doc_ids;
};

/// Maps (decomposition, prefix) to a per-query training loss. Stands in
/// for the downstream system being trained.
class DownstreamEvaluator {
public:
    virtual ~DownstreamEvaluator() = default;

    /// Whether query_loss consumes sub-queries. Evaluators that only look
    /// at the prefix (the synthetic testbed) skip decomposition entirely.
    virtual bool needs_decompositions() const { return true; }

    virtual double query_loss(const TrainQuery& query,
                              const std::vector<std::string>& sub_queries,
                              const PromptPrefix& prefix) = 0;
};

/// Header, then each pair as "Solution: <prefix>\nScore: <loss to 4
/// decimals>" with the best (lowest) loss last, then the footer.
std::string render_meta_prompt(const OptimizerConfig& config, const SolutionScoreList& history);

/// Decomposes every training query with `prefix` (consulting `cache` when
/// given), feeds the sub-queries to the evaluator and returns the mean
/// loss. `decomposer` may be null when the evaluator does not need
/// decompositions. Fills `decompositions_out` (keyed by query id) when
/// non-null and decompositions were produced.
double evaluate_prefix_loss(const PromptPrefix& prefix, const std::vector<TrainQuery>& queries,
                            DownstreamEvaluator& evaluator, LlmClient* decomposer,
                            DecompositionCache* cache,
                            std::map<std::string, DecomposedQuery>* decompositions_out = nullptr,
                            const std::string& task_description = kDefaultTaskDescription);

struct OptimizeResult {
    PromptPrefix prefix;  ///< accepted prefix; p_old when updated == false
    bool updated = false; ///< an alpha-improvement proposal was accepted
    std::map<std::string, DecomposedQuery> decompositions; ///< for the returned prefix
    SolutionScoreList history;
    int proposals = 0; ///< optimizer LLM iterations consumed
};

/// One round of prompt search: seeds the history with (p_old, loss), then
/// asks the optimizer LLM for up to kappa proposals, evaluating each and
/// stopping as soon as loss(p_old) - loss(p_new) >= alpha. Empty or
/// duplicate proposals and transport failures consume an iteration without
/// evaluation. When no proposal reaches the alpha improvement, p_old is
/// returned unchanged so callers can detect a fixed point.
OptimizeResult optimize_prompt(const OptimizerConfig& config, const PromptPrefix& p_old,
                               const std::vector<TrainQuery>& queries,
                               DownstreamEvaluator& evaluator, LlmClient& optimizer_llm,
                               LlmClient* decomposer = nullptr,
                               DecompositionCache* cache = nullptr, RunLog* log = nullptr,
                               const std::string& task_description = kDefaultTaskDescription);

} // namespace poqd
