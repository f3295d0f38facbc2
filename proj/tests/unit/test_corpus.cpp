#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "poqd/corpus.hpp"
#include "poqd/errors.hpp"
#include "poqd/mvr.hpp"
#include "poqd/rng.hpp"

using namespace poqd;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

} // namespace

TEST_CASE("sentence segmentation") {
    CHECK(segment_document("A sentence. Another one.") ==
          std::vector<std::string>{"A sentence.", "Another one."});
    CHECK(segment_document("No terminator here") ==
          std::vector<std::string>{"No terminator here"});
    // The splitting rule is applied literally; abbreviations are not special.
    CHECK(segment_document("Dr. Smith arrived. He left.") ==
          std::vector<std::string>{"Dr.", "Smith arrived.", "He left."});
    CHECK(segment_document("One! Two? Three.") == std::vector<std::string>{"One!", "Two?", "Three."});
    CHECK(segment_document("Version 1.5 is out. Yes.") ==
          std::vector<std::string>{"Version 1.5 is out.", "Yes."});
    CHECK_THROWS_AS(segment_document("   \n "), InvariantError);
}

TEST_CASE("build_index counts and invariants") {
    EmbedderSpec spec;
    spec.dimension = 8;
    const auto index = build_index({{"d1", "First sentence. Second one."}}, spec);
    CHECK(index.dimension == 8);
    CHECK(index.embedder_fingerprint == spec.fingerprint());
    REQUIRE(index.documents.size() == 1);
    REQUIRE(index.documents[0].segments.size() == 2);
    for (const auto& seg : index.documents[0].segments) {
        CHECK(l2_norm(seg.vector) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("build_index rejects duplicate and empty ids") {
    EmbedderSpec spec;
    spec.dimension = 8;
    CHECK_THROWS_WITH_AS(build_index({{"dup", "a."}, {"dup", "b."}}, spec),
                         doctest::Contains("dup"), InvariantError);
    CHECK_THROWS_AS(build_index({}, spec), InvariantError);
    CHECK_THROWS_AS(build_index({{" ", "a."}}, spec), InvariantError);
}

TEST_CASE("index round trip preserves everything bit-exactly") {
    EmbedderSpec spec;
    spec.dimension = 8;
    const auto index = build_index({{"d1", "Alpha beta. Gamma delta."},
                                    {"d2", "No terminator"},
                                    {"d3", "One. Two. Three?"}},
                                   spec);
    const std::string p1 = temp_path("poqd_rt1.idx");
    const std::string p2 = temp_path("poqd_rt2.idx");
    save_index(index, p1);
    const auto loaded = load_index(p1);
    save_index(loaded, p2);

    CHECK(read_file(p1) == read_file(p2)); // save -> load -> save is byte-identical

    CHECK(loaded.dimension == index.dimension);
    CHECK(loaded.embedder_fingerprint == index.embedder_fingerprint);
    REQUIRE(loaded.documents.size() == index.documents.size());
    for (std::size_t d = 0; d < index.documents.size(); ++d) {
        CHECK(loaded.documents[d].doc_id == index.documents[d].doc_id);
        CHECK(loaded.documents[d].raw_text == index.documents[d].raw_text);
        REQUIRE(loaded.documents[d].segments.size() == index.documents[d].segments.size());
        for (std::size_t s = 0; s < index.documents[d].segments.size(); ++s) {
            CHECK(loaded.documents[d].segments[s].text == index.documents[d].segments[s].text);
            CHECK(loaded.documents[d].segments[s].vector ==
                  index.documents[d].segments[s].vector);
        }
    }

    // Scores identical bit-exactly on random queries.
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<EmbeddingVector> query(2, EmbeddingVector(8));
        for (auto& v : query) {
            for (auto& x : v) x = static_cast<float>(rng.gaussian());
        }
        for (std::size_t d = 0; d < index.documents.size(); ++d) {
            CHECK(maxsim_score(query, index.documents[d]) ==
                  maxsim_score(query, loaded.documents[d]));
        }
    }

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("load errors are distinct") {
    EmbedderSpec spec;
    spec.dimension = 4;
    const auto index = build_index({{"d1", "Hello there."}}, spec);
    const std::string path = temp_path("poqd_load_err.idx");
    save_index(index, path);
    const std::string good = read_file(path);

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_index(temp_path("poqd_no_such.idx")), IoError);
    }
    SUBCASE("wrong magic") {
        std::string bad = good;
        bad[0] = 'X';
        write_file(path, bad);
        CHECK_THROWS_WITH_AS(load_index(path), doctest::Contains("magic"), IoError);
    }
    SUBCASE("version mismatch") {
        std::string bad = good;
        bad[4] = 9;
        write_file(path, bad);
        CHECK_THROWS_WITH_AS(load_index(path), doctest::Contains("version"), IoError);
    }
    SUBCASE("truncation") {
        write_file(path, good.substr(0, good.size() / 2));
        CHECK_THROWS_AS(load_index(path), IoError);
    }
    SUBCASE("checksum") {
        std::string bad = good;
        bad[good.size() / 2] ^= 0x40; // flip a payload bit
        write_file(path, bad);
        CHECK_THROWS_WITH_AS(load_index(path), doctest::Contains("checksum"), IoError);
    }
    std::remove(path.c_str());
}

TEST_CASE("querying with the wrong dimension fails") {
    EmbedderSpec spec;
    spec.dimension = 8;
    const auto index = build_index({{"d1", "Hello there."}}, spec);
    const std::vector<EmbeddingVector> query16{EmbeddingVector(16, 0.25f)};
    CHECK_THROWS_WITH_AS(top_k_retrieve(index, query16, 1), doctest::Contains("dimension"),
                         InvariantError);
}

TEST_CASE("oversized documents are truncated to the segment cap") {
    EmbedderSpec spec;
    spec.dimension = 4;
    std::string text;
    for (int i = 0; i < 600; ++i) text += "s" + std::to_string(i) + ". ";
    const auto index = build_index({{"big", text}}, spec);
    CHECK(index.documents[0].segments.size() == kMaxSegmentsPerDocument);
}

TEST_CASE("id/text JSONL loader") {
    const std::string path = temp_path("poqd_corpus.jsonl");
    write_file(path, "{\"id\":\"a\",\"text\":\"Alpha.\"}\n\n{\"id\":\"b\",\"text\":\"Beta.\"}\n");
    const auto docs = load_id_text_jsonl(path);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0] == std::pair<std::string, std::string>{"a", "Alpha."});
    write_file(path, "not json\n");
    CHECK_THROWS_AS(load_id_text_jsonl(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("ground truth loader") {
    const std::string path = temp_path("poqd_gt.tsv");
    write_file(path, "q1\td1,d2\nq2\td9\n");
    const auto gt = load_ground_truth(path);
    CHECK(gt.at("q1") == std::set<std::string>{"d1", "d2"});
    CHECK(gt.at("q2") == std::set<std::string>{"d9"});
    write_file(path, "q-without-tab\n");
    CHECK_THROWS_AS(load_ground_truth(path), IoError);
    std::remove(path.c_str());
}
