#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "poqd/errors.hpp"
#include "poqd/mvr.hpp"
#include "poqd/rng.hpp"

using namespace poqd;

namespace {

SegmentedDocument doc_from_vectors(std::string id, std::vector<EmbeddingVector> vectors) {
    SegmentedDocument doc;
    doc.doc_id = std::move(id);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        doc.segments.push_back({"s" + std::to_string(i), std::move(vectors[i])});
    }
    return doc;
}

EmbeddingVector random_unit(Rng& rng, int d) {
    EmbeddingVector v(static_cast<std::size_t>(d));
    double norm = 0.0;
    std::vector<double> raw(v.size());
    for (auto& x : raw) {
        x = rng.gaussian();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(raw[i] / norm);
    return v;
}

/// Independent oracle: plain double loop over (i, j) dot products.
double naive_maxsim(const std::vector<EmbeddingVector>& queries, const SegmentedDocument& doc) {
    double total = 0.0;
    for (const auto& q : queries) {
        double best = -1e300;
        for (const auto& seg : doc.segments) {
            double dot = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                dot += static_cast<double>(q[i]) * static_cast<double>(seg.vector[i]);
            }
            best = std::max(best, dot);
        }
        total += best;
    }
    return total / static_cast<double>(queries.size());
}

} // namespace

TEST_CASE("identity and orthogonal cases") {
    const EmbeddingVector q{1.0f, 0.0f};
    CHECK(maxsim_score({q}, doc_from_vectors("d", {{1.0f, 0.0f}})) ==
          doctest::Approx(1.0).epsilon(1e-6));
    CHECK(maxsim_score({q}, doc_from_vectors("d", {{0.0f, 1.0f}})) ==
          doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("two query vectors against two segments") {
    const auto doc = doc_from_vectors("d", {{0.6f, 0.8f}, {0.8f, 0.6f}});
    const std::vector<EmbeddingVector> queries{{1.0f, 0.0f}, {0.0f, 1.0f}};
    // (max(0.6, 0.8) + max(0.8, 0.6)) / 2, up to f32 storage rounding
    CHECK(maxsim_score(queries, doc) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("input errors") {
    const auto doc = doc_from_vectors("d", {{1.0f, 0.0f}});
    CHECK_THROWS_AS(maxsim_score({}, doc), InvariantError);
    CHECK_THROWS_AS(maxsim_score({EmbeddingVector{1.0f, 0.0f, 0.0f}}, doc), InvariantError);
    SegmentedDocument empty;
    empty.doc_id = "e";
    CHECK_THROWS_AS(maxsim_score({EmbeddingVector{1.0f, 0.0f}}, empty), InvariantError);

    MultiVectorIndex index;
    index.dimension = 2;
    CHECK_THROWS_AS(top_k_retrieve(index, {EmbeddingVector{1.0f, 0.0f}}, 1), InvariantError);
    index.documents.push_back(doc);
    CHECK_THROWS_AS(top_k_retrieve(index, {EmbeddingVector{1.0f, 0.0f}}, 0), InvariantError);
}

TEST_CASE("ties break by ascending doc id") {
    MultiVectorIndex index;
    index.dimension = 2;
    index.documents.push_back(doc_from_vectors("b", {{1.0f, 0.0f}}));
    index.documents.push_back(doc_from_vectors("a", {{1.0f, 0.0f}}));
    index.documents.push_back(doc_from_vectors("c", {{0.0f, 1.0f}}));
    const auto top = top_k_retrieve(index, {EmbeddingVector{1.0f, 0.0f}}, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].doc_id == "a");
    CHECK(top[1].doc_id == "b");
}

TEST_CASE("single-document corpus returns that document for any k") {
    MultiVectorIndex index;
    index.dimension = 2;
    index.documents.push_back(doc_from_vectors("only", {{0.0f, 1.0f}}));
    for (int k : {1, 3, 100}) {
        const auto top = top_k_retrieve(index, {EmbeddingVector{1.0f, 0.0f}}, k);
        REQUIRE(top.size() == 1);
        CHECK(top[0].doc_id == "only");
    }
}

TEST_CASE("oracle equivalence on random instances") {
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = rng.uniform_int(2, 32);
        const int kq = rng.uniform_int(1, 8);
        const int m = rng.uniform_int(1, 16);
        std::vector<EmbeddingVector> queries;
        for (int i = 0; i < kq; ++i) queries.push_back(random_unit(rng, d));
        std::vector<EmbeddingVector> segs;
        for (int j = 0; j < m; ++j) segs.push_back(random_unit(rng, d));
        const auto doc = doc_from_vectors("d", segs);

        const double got = maxsim_score(queries, doc);
        CHECK(std::abs(got - naive_maxsim(queries, doc)) < 1e-9);
        CHECK(got >= -1.0 - 1e-9);
        CHECK(got <= 1.0 + 1e-9);
    }
}

TEST_CASE("permuting query vectors or segments leaves the score unchanged") {
    Rng rng(7);
    const int d = 16;
    std::vector<EmbeddingVector> queries;
    for (int i = 0; i < 5; ++i) queries.push_back(random_unit(rng, d));
    std::vector<EmbeddingVector> segs;
    for (int j = 0; j < 7; ++j) segs.push_back(random_unit(rng, d));

    const double base = maxsim_score(queries, doc_from_vectors("d", segs));

    auto perm_q = queries;
    std::reverse(perm_q.begin(), perm_q.end());
    CHECK(maxsim_score(perm_q, doc_from_vectors("d", segs)) ==
          doctest::Approx(base).epsilon(1e-12));

    auto perm_s = segs;
    std::rotate(perm_s.begin(), perm_s.begin() + 3, perm_s.end());
    CHECK(maxsim_score(queries, doc_from_vectors("d", perm_s)) ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("appending a segment never decreases the score") {
    Rng rng(9);
    const int d = 8;
    std::vector<EmbeddingVector> queries{random_unit(rng, d), random_unit(rng, d)};
    std::vector<EmbeddingVector> segs{random_unit(rng, d)};
    double prev = maxsim_score(queries, doc_from_vectors("d", segs));
    for (int extra = 0; extra < 10; ++extra) {
        segs.push_back(random_unit(rng, d));
        const double cur = maxsim_score(queries, doc_from_vectors("d", segs));
        CHECK(cur >= prev - 1e-12);
        prev = cur;
    }
}

TEST_CASE("full retrieval order is consistent with pairwise scores") {
    Rng rng(31);
    const int d = 8;
    MultiVectorIndex index;
    index.dimension = d;
    for (int i = 0; i < 12; ++i) {
        index.documents.push_back(
            doc_from_vectors("doc" + std::to_string(i), {random_unit(rng, d), random_unit(rng, d)}));
    }
    const std::vector<EmbeddingVector> queries{random_unit(rng, d)};
    const auto ranked = top_k_retrieve(index, queries, static_cast<int>(index.documents.size()));
    REQUIRE(ranked.size() == index.documents.size());
    for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
        const bool ordered = ranked[i].score > ranked[i + 1].score ||
                             (ranked[i].score == ranked[i + 1].score &&
                              ranked[i].doc_id < ranked[i + 1].doc_id);
        CHECK(ordered);
    }
}
