#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poqd/llm_client.hpp"

namespace poqd {

/// The optimizable instruction prefix placed in front of the fixed
/// decomposition template.
struct PromptPrefix {
    std::string text;
};

/// Sub-queries derived from a query, with provenance.
struct DecomposedQuery {
    std::string query;
    std::vector<std::string> sub_queries;
    PromptPrefix prefix_used;
    bool filtered = false; ///< the hallucination filter ran
    bool degraded = false; ///< parse/transport failure; whole query used
};

/// Fixed task description appended after the prefix. Pinned so runs are
/// reproducible; overridable through the config file.
extern const char* const kDefaultTaskDescription;

/// Starting prefix for optimization runs when none is configured.
extern const char* const kDefaultInitialPrefix;

/// Deterministic concatenation: prefix, blank line, task description,
/// blank line, "Query: <query>".
std::string render_prompt(const PromptPrefix& prefix, const std::string& query,
                          const std::string& task_description = kDefaultTaskDescription);

/// Splits raw LLM output on '|', trims pieces and drops empties. When the
/// output spans several lines, the last line containing '|' wins (models
/// often prepend prose). Throws ParseError when nothing survives.
std::vector<std::string> parse_subqueries(const std::string& raw_output);

/// Hallucination filter: drops sub-query tokens absent from the query's
/// token set (lowercase, split on whitespace and punctuation). Sub-queries
/// losing every token are dropped; if all are dropped the whole query is
/// returned as one sub-query. A sub-query that loses nothing is kept
/// verbatim, which makes the filter idempotent.
std::vector<std::string> filter_subqueries(const std::string& query,
                                           const std::vector<std::string>& sub_queries);

/// render -> LLM -> parse -> filter. Never throws for LLM misbehavior:
/// parse or transport failure yields the whole query as one sub-query
/// with degraded=true.
DecomposedQuery decompose_query(LlmClient& client, const PromptPrefix& prefix,
                                const std::string& query,
                                const std::string& task_description = kDefaultTaskDescription);

/// Cache of decompositions keyed by (prefix hash, query), persisted as
/// line-delimited JSON so repeated optimizer iterations skip LLM calls.
class DecompositionCache {
public:
    DecompositionCache() = default; ///< in-memory only

    /// Loads existing entries from `path` (if present) and appends new
    /// entries to it as they are inserted.
    explicit DecompositionCache(std::string path);

    std::optional<DecomposedQuery> find(const PromptPrefix& prefix, const std::string& query) const;
    void put(const DecomposedQuery& dq);
    std::size_t size() const { return entries_.size(); }

    static std::string prefix_hash(const PromptPrefix& prefix);

private:
    struct Entry {
        std::vector<std::string> sub_queries;
        bool filtered = false;
        bool degraded = false;
    };

    std::map<std::string, Entry> entries_;
    std::string path_;
};

} // namespace poqd
