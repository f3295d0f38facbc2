#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "poqd/mvr.hpp"

namespace poqd {

struct EvalRecord {
    std::string query_id;
    std::set<std::string> gold_doc_ids;
    std::vector<std::string> retrieved; ///< ranked doc ids, no duplicates
    std::optional<std::string> gold_answer;
    std::optional<std::string> predicted_answer;
};

/// 1 iff any gold doc id appears among the first min(k, |retrieved|)
/// entries. Throws InvariantError for k < 1, an empty gold set, or a
/// duplicate doc id in `retrieved`.
int hit_at_k(const EvalRecord& record, int k);

/// Lowercase, strip punctuation, collapse whitespace, drop the English
/// articles a/an/the.
std::string normalize_answer(const std::string& answer);

/// 1 iff the normalized strings are equal.
int exact_match(const std::string& gold, const std::string& predicted);

struct QueryMetrics {
    std::string query_id;
    int hit = 0;
    std::vector<ScoredDoc> retrieved;
};

struct MetricsReport {
    int k = 0;
    std::vector<QueryMetrics> per_query;
    double mean_hit = 0.0;
};

/// Retrieves top-k for every query (sub-queries from `decompositions`,
/// falling back to the whole query text) and scores Hit@k against the
/// ground truth. A query without ground truth is an error naming it.
MetricsReport evaluate_run(const MultiVectorIndex& index, Embedder& embedder,
                           const std::vector<std::pair<std::string, std::string>>& queries,
                           const std::map<std::string, std::vector<std::string>>& decompositions,
                           const std::map<std::string, std::set<std::string>>& ground_truth,
                           int k);

/// Human-readable table.
std::string format_metrics_table(const MetricsReport& report);

/// Machine-readable line-delimited records (one per query plus a summary).
std::string format_metrics_jsonl(const MetricsReport& report);

} // namespace poqd
