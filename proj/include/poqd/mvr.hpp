#pragma once

#include <string>
#include <vector>

#include "poqd/corpus.hpp"

namespace poqd {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Late-interaction similarity: the mean over query vectors of each
/// vector's best dot product against the document's segment vectors.
/// In [-1, 1] for unit vectors. Accumulates in double.
double maxsim_score(const std::vector<EmbeddingVector>& query_vectors,
                    const SegmentedDocument& doc);

/// Exhaustively scores every document and returns the top min(k, |index|),
/// sorted by score descending with ties broken by ascending doc id.
std::vector<ScoredDoc> top_k_retrieve(const MultiVectorIndex& index,
                                      const std::vector<EmbeddingVector>& query_vectors, int k);

} // namespace poqd
