#include <doctest.h>

#include "poqd/corpus.hpp"
#include "poqd/errors.hpp"
#include "poqd/eval.hpp"

using namespace poqd;

namespace {

EvalRecord record(std::set<std::string> gold, std::vector<std::string> retrieved) {
    EvalRecord r;
    r.query_id = "q";
    r.gold_doc_ids = std::move(gold);
    r.retrieved = std::move(retrieved);
    return r;
}

} // namespace

TEST_CASE("hit_at_k basics") {
    CHECK(hit_at_k(record({"g"}, {"g", "x", "y"}), 1) == 1);
    CHECK(hit_at_k(record({"g"}, {"x", "y", "g"}), 2) == 0);
    CHECK(hit_at_k(record({"g"}, {"x", "y", "g"}), 3) == 1);
    CHECK(hit_at_k(record({"g"}, {"x"}), 5) == 0); // retrieved shorter than k
}

TEST_CASE("hit_at_k rejects bad inputs") {
    CHECK_THROWS_AS(hit_at_k(record({"g"}, {"a"}), 0), InvariantError);
    CHECK_THROWS_AS(hit_at_k(record({}, {"a"}), 1), InvariantError);
    CHECK_THROWS_AS(hit_at_k(record({"g"}, {"a", "a"}), 1), InvariantError);
}

TEST_CASE("hit_at_k is non-decreasing in k") {
    const auto r = record({"g"}, {"a", "b", "g", "c"});
    int prev = 0;
    for (int k = 1; k <= 6; ++k) {
        const int cur = hit_at_k(r, k);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("exact match normalization") {
    CHECK(exact_match("Skyscrapers", "skyscrapers.") == 1);
    CHECK(exact_match("Skyscrapers", "towers") == 0);
    CHECK(exact_match("the skyscrapers", "skyscrapers") == 1);
    CHECK(exact_match("A  big   answer", "big answer") == 1);
    CHECK(exact_match("an apple", "the apple!") == 1);
    CHECK(normalize_answer("The Answer, really!") == "answer really");
}

TEST_CASE("evaluate_run produces per-query hits and the dataset mean") {
    EmbedderSpec spec;
    spec.dimension = 16;
    const auto index = build_index({{"d-cats", "cats purr. cats nap."},
                                    {"d-dogs", "dogs bark. dogs fetch."}},
                                   spec);
    auto embedder = make_embedder(spec);

    const std::vector<std::pair<std::string, std::string>> queries{
        {"q1", "cats purr."}, {"q2", "dogs bark."}};
    const std::map<std::string, std::set<std::string>> gt{{"q1", {"d-cats"}},
                                                          {"q2", {"d-cats"}}};

    const auto report = evaluate_run(index, *embedder, queries, {}, gt, 1);
    REQUIRE(report.per_query.size() == 2);
    CHECK(report.per_query[0].hit == 1); // exact segment match wins
    CHECK(report.per_query[1].hit == 0); // gold is wrong on purpose
    CHECK(report.mean_hit == doctest::Approx(0.5));

    const auto table = format_metrics_table(report);
    CHECK(table.find("q1") != std::string::npos);
    CHECK(table.find("mean hit@1") != std::string::npos);
    const auto jsonl = format_metrics_jsonl(report);
    CHECK(jsonl.find("\"record\":\"summary\"") != std::string::npos);
}

TEST_CASE("dataset mean over hits {1,0,1,1} is 0.75") {
    EmbedderSpec spec;
    spec.dimension = 16;
    const auto index = build_index({{"a", "alpha alpha."}, {"b", "beta beta."}}, spec);
    auto embedder = make_embedder(spec);
    const std::vector<std::pair<std::string, std::string>> queries{
        {"q1", "alpha alpha."}, {"q2", "alpha alpha."}, {"q3", "beta beta."}, {"q4", "beta beta."}};
    const std::map<std::string, std::set<std::string>> gt{
        {"q1", {"a"}}, {"q2", {"b"}}, {"q3", {"b"}}, {"q4", {"b"}}};
    const auto report = evaluate_run(index, *embedder, queries, {}, gt, 1);
    CHECK(report.per_query[0].hit == 1);
    CHECK(report.per_query[1].hit == 0);
    CHECK(report.per_query[2].hit == 1);
    CHECK(report.per_query[3].hit == 1);
    CHECK(report.mean_hit == doctest::Approx(0.75));
}

TEST_CASE("evaluate_run reorders queries without changing the mean") {
    EmbedderSpec spec;
    spec.dimension = 8;
    const auto index = build_index({{"a", "alpha."}, {"b", "beta."}}, spec);
    auto embedder = make_embedder(spec);
    const std::map<std::string, std::set<std::string>> gt{{"q1", {"a"}}, {"q2", {"b"}}};

    const std::vector<std::pair<std::string, std::string>> fwd{{"q1", "alpha"}, {"q2", "gamma"}};
    const std::vector<std::pair<std::string, std::string>> rev{{"q2", "gamma"}, {"q1", "alpha"}};
    CHECK(evaluate_run(index, *embedder, fwd, {}, gt, 1).mean_hit ==
          evaluate_run(index, *embedder, rev, {}, gt, 1).mean_hit);
}

TEST_CASE("evaluate_run names the query missing ground truth") {
    EmbedderSpec spec;
    spec.dimension = 8;
    const auto index = build_index({{"a", "alpha."}}, spec);
    auto embedder = make_embedder(spec);
    CHECK_THROWS_WITH_AS(
        evaluate_run(index, *embedder, {{"q-orphan", "alpha"}}, {}, {}, 1),
        doctest::Contains("q-orphan"), InvariantError);
}

TEST_CASE("evaluate_run uses provided decompositions") {
    EmbedderSpec spec;
    spec.dimension = 16;
    const auto index = build_index({{"a", "victoria hong kong."}, {"b", "other stuff."}}, spec);
    auto embedder = make_embedder(spec);
    const std::map<std::string, std::set<std::string>> gt{{"q1", {"a"}}};
    const std::map<std::string, std::vector<std::string>> decs{
        {"q1", {"victoria hong kong."}}};
    const auto report =
        evaluate_run(index, *embedder, {{"q1", "something unrelated"}}, decs, gt, 1);
    CHECK(report.per_query[0].hit == 1);
}
