#include "poqd/decompose.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "poqd/errors.hpp"
#include "poqd/rng.hpp"
#include "poqd/text.hpp"

namespace poqd {

const char* const kDefaultTaskDescription =
    "You are given a search query. Split it into sub-queries for retrieval: short "
    "phrases that each use only words from the query. Reply with the sub-queries on "
    "one line, separated by a vertical bar '|', and nothing else.";

const char* const kDefaultInitialPrefix =
    "Decompose the question into the smallest set of self-contained phrases needed "
    "to retrieve the answer.";

std::string render_prompt(const PromptPrefix& prefix, const std::string& query,
                          const std::string& task_description) {
    if (trim(prefix.text).empty()) {
        throw InvariantError("render_prompt: prompt prefix is empty");
    }
    if (trim(query).empty()) {
        throw InvariantError("render_prompt: query is empty");
    }
    return prefix.text + "\n\n" + task_description + "\n\nQuery: " + query;
}

std::vector<std::string> parse_subqueries(const std::string& raw_output) {
    std::string source = raw_output;
    const auto lines = split_lines(raw_output);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (it->find('|') != std::string::npos) {
            source = *it;
            break;
        }
    }

    std::vector<std::string> out;
    std::string piece;
    std::stringstream stream(source);
    while (std::getline(stream, piece, '|')) {
        piece = trim(piece);
        if (!piece.empty()) out.push_back(std::move(piece));
    }
    if (out.empty()) {
        throw ParseError("no sub-queries in LLM output");
    }
    return out;
}

namespace {

/// Original-casing counterpart of tokenize(): same boundaries, no lowercasing.
std::vector<std::string> raw_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : s) {
        const unsigned char c = static_cast<unsigned char>(raw);
        const bool sep = std::isspace(c) != 0 || (c < 128 && std::ispunct(c) != 0);
        if (sep) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(raw);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

} // namespace

std::vector<std::string> filter_subqueries(const std::string& query,
                                           const std::vector<std::string>& sub_queries) {
    if (sub_queries.empty()) {
        throw InvariantError("filter_subqueries: sub-query list is empty");
    }
    const auto allowed = token_set(query);

    std::vector<std::string> out;
    for (const auto& sq : sub_queries) {
        const auto tokens = raw_tokens(sq);
        std::vector<std::string> kept;
        for (const auto& t : tokens) {
            if (allowed.count(to_lower(t)) > 0) kept.push_back(t);
        }
        if (kept.empty()) continue;
        if (kept.size() == tokens.size()) {
            // Nothing dropped: keep the sub-query verbatim.
            out.push_back(sq);
        } else {
            out.push_back(join(kept, " "));
        }
    }
    if (out.empty()) {
        return {query};
    }
    return out;
}

DecomposedQuery decompose_query(LlmClient& client, const PromptPrefix& prefix,
                                const std::string& query,
                                const std::string& task_description) {
    if (trim(query).empty()) {
        throw InvariantError("decompose_query: query is empty");
    }

    DecomposedQuery result;
    result.query = query;
    result.prefix_used = prefix;

    try {
        const std::string raw = client.complete(render_prompt(prefix, query, task_description));
        result.sub_queries = filter_subqueries(query, parse_subqueries(raw));
        result.filtered = true;
    } catch (const ParseError&) {
        result.sub_queries = {query};
        result.degraded = true;
    } catch (const TransportError&) {
        result.sub_queries = {query};
        result.degraded = true;
    }
    return result;
}

DecompositionCache::DecompositionCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return; // fresh cache file, created on first put
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("prefix-hash") ||
            !record.contains("query") || !record.contains("sub-queries")) {
            throw IoError(path_ + ":" + std::to_string(lineno) + ": malformed cache record");
        }
        Entry entry;
        entry.sub_queries = record["sub-queries"].get<std::vector<std::string>>();
        entry.filtered = record.value("filtered", false);
        entry.degraded = record.value("degraded", false);
        entries_[record["prefix-hash"].get<std::string>() + "\t" +
                 record["query"].get<std::string>()] = std::move(entry);
    }
}

std::string DecompositionCache::prefix_hash(const PromptPrefix& prefix) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(prefix.text)));
    return buf;
}

std::optional<DecomposedQuery> DecompositionCache::find(const PromptPrefix& prefix,
                                                        const std::string& query) const {
    const auto it = entries_.find(prefix_hash(prefix) + "\t" + query);
    if (it == entries_.end()) return std::nullopt;
    DecomposedQuery dq;
    dq.query = query;
    dq.prefix_used = prefix;
    dq.sub_queries = it->second.sub_queries;
    dq.filtered = it->second.filtered;
    dq.degraded = it->second.degraded;
    return dq;
}

void DecompositionCache::put(const DecomposedQuery& dq) {
    const std::string key = prefix_hash(dq.prefix_used) + "\t" + dq.query;
    if (entries_.count(key) > 0) return;
    entries_[key] = Entry{dq.sub_queries, dq.filtered, dq.degraded};

    if (path_.empty()) return;
    nlohmann::json record{
        {"prefix-hash", prefix_hash(dq.prefix_used)},
        {"query", dq.query},
        {"sub-queries", dq.sub_queries},
        {"filtered", dq.filtered},
        {"degraded", dq.degraded},
    };
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to cache file '" + path_ + "'");
    out << record.dump() << "\n";
}

} // namespace poqd
