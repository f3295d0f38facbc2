#include "poqd/eval.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "poqd/errors.hpp"
#include "poqd/text.hpp"

namespace poqd {

int hit_at_k(const EvalRecord& record, int k) {
    if (k < 1) {
        throw InvariantError("hit_at_k: k must be >= 1, got " + std::to_string(k));
    }
    if (record.gold_doc_ids.empty()) {
        throw InvariantError("hit_at_k: query '" + record.query_id + "' has an empty gold set");
    }
    std::set<std::string> seen;
    for (const auto& id : record.retrieved) {
        if (!seen.insert(id).second) {
            throw InvariantError("hit_at_k: query '" + record.query_id +
                                 "' has duplicate retrieved doc id '" + id + "'");
        }
    }
    const std::size_t depth = std::min(static_cast<std::size_t>(k), record.retrieved.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (record.gold_doc_ids.count(record.retrieved[i]) > 0) return 1;
    }
    return 0;
}

std::string normalize_answer(const std::string& answer) {
    std::string stripped;
    stripped.reserve(answer.size());
    for (char raw : answer) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (c < 128 && std::ispunct(c) != 0) continue;
        stripped.push_back(static_cast<char>(std::tolower(c)));
    }
    std::vector<std::string> words;
    for (auto& w : split_whitespace(stripped)) {
        if (w == "a" || w == "an" || w == "the") continue;
        words.push_back(std::move(w));
    }
    return join(words, " ");
}

int exact_match(const std::string& gold, const std::string& predicted) {
    return normalize_answer(gold) == normalize_answer(predicted) ? 1 : 0;
}

MetricsReport evaluate_run(const MultiVectorIndex& index, Embedder& embedder,
                           const std::vector<std::pair<std::string, std::string>>& queries,
                           const std::map<std::string, std::vector<std::string>>& decompositions,
                           const std::map<std::string, std::set<std::string>>& ground_truth,
                           int k) {
    if (k < 1) {
        throw InvariantError("evaluate_run: k must be >= 1");
    }
    MetricsReport report;
    report.k = k;

    double total = 0.0;
    for (const auto& [qid, text] : queries) {
        const auto gt = ground_truth.find(qid);
        if (gt == ground_truth.end()) {
            throw InvariantError("evaluate_run: no ground truth for query '" + qid + "'");
        }
        std::vector<std::string> sub_queries{text};
        if (const auto dec = decompositions.find(qid); dec != decompositions.end()) {
            sub_queries = dec->second;
        }

        QueryMetrics qm;
        qm.query_id = qid;
        qm.retrieved = top_k_retrieve(index, embedder.embed(sub_queries), k);

        EvalRecord record;
        record.query_id = qid;
        record.gold_doc_ids = gt->second;
        for (const auto& sd : qm.retrieved) record.retrieved.push_back(sd.doc_id);
        qm.hit = hit_at_k(record, k);

        total += qm.hit;
        report.per_query.push_back(std::move(qm));
    }
    report.mean_hit = report.per_query.empty() ? 0.0 : total / report.per_query.size();
    return report;
}

std::string format_metrics_table(const MetricsReport& report) {
    std::ostringstream out;
    out << "query-id          hit@" << report.k << "  top-1\n";
    for (const auto& qm : report.per_query) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-18s %5d  %s (%.6f)\n", qm.query_id.c_str(), qm.hit,
                      qm.retrieved.empty() ? "-" : qm.retrieved.front().doc_id.c_str(),
                      qm.retrieved.empty() ? 0.0 : qm.retrieved.front().score);
        out << line;
    }
    char mean[64];
    std::snprintf(mean, sizeof(mean), "%.6f", report.mean_hit);
    out << "mean hit@" << report.k << " over " << report.per_query.size() << " queries: " << mean
        << "\n";
    return out.str();
}

std::string format_metrics_jsonl(const MetricsReport& report) {
    std::ostringstream out;
    for (const auto& qm : report.per_query) {
        nlohmann::json retrieved = nlohmann::json::array();
        for (const auto& sd : qm.retrieved) {
            retrieved.push_back({{"doc-id", sd.doc_id}, {"score", sd.score}});
        }
        out << nlohmann::json{{"record", "query"},
                              {"query-id", qm.query_id},
                              {"hit", qm.hit},
                              {"retrieved", retrieved}}
                   .dump()
            << "\n";
    }
    out << nlohmann::json{{"record", "summary"},
                          {"k", report.k},
                          {"queries", report.per_query.size()},
                          {"mean-hit", report.mean_hit}}
               .dump()
        << "\n";
    return out.str();
}

} // namespace poqd
