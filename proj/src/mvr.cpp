#include "poqd/mvr.hpp"

#include <algorithm>
#include <limits>

#include "poqd/errors.hpp"

namespace poqd {

namespace {

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

} // namespace

double maxsim_score(const std::vector<EmbeddingVector>& query_vectors,
                    const SegmentedDocument& doc) {
    if (query_vectors.empty()) {
        throw InvariantError("maxsim_score: query vector list is empty");
    }
    if (doc.segments.empty()) {
        throw InvariantError("maxsim_score: doc '" + doc.doc_id + "' has no segments");
    }
    const std::size_t dim = doc.segments.front().vector.size();
    for (const auto& seg : doc.segments) {
        if (seg.vector.size() != dim) {
            throw InvariantError("maxsim_score: doc '" + doc.doc_id +
                                 "' has segments of mixed dimension");
        }
    }

    double sum = 0.0;
    for (const auto& q : query_vectors) {
        if (q.size() != dim) {
            throw InvariantError("maxsim_score: query dimension " + std::to_string(q.size()) +
                                 " does not match document dimension " + std::to_string(dim));
        }
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& seg : doc.segments) {
            best = std::max(best, dot(q, seg.vector));
        }
        sum += best;
    }
    return sum / static_cast<double>(query_vectors.size());
}

std::vector<ScoredDoc> top_k_retrieve(const MultiVectorIndex& index,
                                      const std::vector<EmbeddingVector>& query_vectors, int k) {
    if (k < 1) {
        throw InvariantError("top_k_retrieve: k must be >= 1, got " + std::to_string(k));
    }
    if (index.documents.empty()) {
        throw InvariantError("top_k_retrieve: index is empty");
    }
    for (const auto& q : query_vectors) {
        if (static_cast<int>(q.size()) != index.dimension) {
            throw InvariantError("top_k_retrieve: query dimension " + std::to_string(q.size()) +
                                 " does not match index dimension " +
                                 std::to_string(index.dimension));
        }
    }

    std::vector<ScoredDoc> scored;
    scored.reserve(index.documents.size());
    for (const auto& doc : index.documents) {
        scored.push_back({doc.doc_id, maxsim_score(query_vectors, doc)});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > static_cast<std::size_t>(k)) {
        scored.resize(static_cast<std::size_t>(k));
    }
    return scored;
}

} // namespace poqd
