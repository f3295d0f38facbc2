#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poqd/corpus.hpp"
#include "poqd/decompose.hpp"
#include "poqd/errors.hpp"
#include "poqd/eval.hpp"
#include "poqd/mvr.hpp"
#include "poqd/trainer.hpp"

namespace py = pybind11;
using namespace poqd;

namespace {

SegmentedDocument doc_from_vectors(const std::vector<EmbeddingVector>& vectors) {
    SegmentedDocument doc;
    doc.doc_id = "doc";
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        doc.segments.push_back({"s" + std::to_string(i), vectors[i]});
    }
    return doc;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-vector retrieval with prompt-optimized query decomposition";

    py::register_exception<Error>(m, "PoqdError", PyExc_RuntimeError);

    py::class_<MultiVectorIndex>(m, "MultiVectorIndex")
        .def(py::init<>())
        .def_readonly("dimension", &MultiVectorIndex::dimension)
        .def_readonly("embedder_fingerprint", &MultiVectorIndex::embedder_fingerprint)
        .def("__len__", [](const MultiVectorIndex& idx) { return idx.documents.size(); })
        .def("doc_ids", [](const MultiVectorIndex& idx) {
            std::vector<std::string> ids;
            for (const auto& d : idx.documents) ids.push_back(d.doc_id);
            return ids;
        });

    m.def(
        "embed_text",
        [](const std::vector<std::string>& texts, int dimension) {
            EmbedderSpec spec;
            spec.dimension = dimension;
            return embed_text(spec, texts);
        },
        py::arg("texts"), py::arg("dimension") = 64,
        "Deterministic unit-norm embeddings, one per text.");

    m.def("segment_document", &segment_document, py::arg("text"),
          "Split text into sentence segments.");

    m.def(
        "maxsim_score",
        [](const std::vector<EmbeddingVector>& query_vectors,
           const std::vector<EmbeddingVector>& doc_vectors) {
            return maxsim_score(query_vectors, doc_from_vectors(doc_vectors));
        },
        py::arg("query_vectors"), py::arg("doc_vectors"),
        "Mean over query vectors of the best dot product against the document vectors.");

    m.def(
        "build_index",
        [](const std::vector<std::pair<std::string, std::string>>& docs, int dimension) {
            EmbedderSpec spec;
            spec.dimension = dimension;
            return build_index(docs, spec);
        },
        py::arg("docs"), py::arg("dimension") = 64,
        "Segment and embed (id, text) pairs with the deterministic embedder.");

    m.def("save_index", &save_index, py::arg("index"), py::arg("path"));
    m.def("load_index", &load_index, py::arg("path"));

    m.def(
        "top_k_retrieve",
        [](const MultiVectorIndex& index, const std::vector<EmbeddingVector>& query_vectors,
           int k) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& sd : top_k_retrieve(index, query_vectors, k)) {
                out.emplace_back(sd.doc_id, sd.score);
            }
            return out;
        },
        py::arg("index"), py::arg("query_vectors"), py::arg("k"),
        "Exhaustive top-k search; returns (doc_id, score) pairs.");

    m.def(
        "search",
        [](const MultiVectorIndex& index, const std::vector<std::string>& sub_queries, int k) {
            EmbedderSpec spec;
            spec.dimension = index.dimension;
            std::vector<std::pair<std::string, double>> out;
            for (const auto& sd : top_k_retrieve(index, embed_text(spec, sub_queries), k)) {
                out.emplace_back(sd.doc_id, sd.score);
            }
            return out;
        },
        py::arg("index"), py::arg("sub_queries"), py::arg("k") = 2,
        "Embed sub-queries with the deterministic embedder and retrieve top-k.");

    m.def(
        "render_prompt",
        [](const std::string& prefix, const std::string& query) {
            return render_prompt(PromptPrefix{prefix}, query);
        },
        py::arg("prefix"), py::arg("query"));

    m.def("parse_subqueries", &parse_subqueries, py::arg("raw_output"));
    m.def("filter_subqueries", &filter_subqueries, py::arg("query"), py::arg("sub_queries"));

    m.def(
        "decompose_query",
        [](const std::string& query, const std::vector<std::string>& script,
           const std::string& prefix) {
            LlmClientSpec spec;
            spec.kind = LlmKind::kScriptedMock;
            spec.script = script;
            LlmClient client(spec);
            const auto dq = decompose_query(client, PromptPrefix{prefix}, query);
            py::dict out;
            out["query"] = dq.query;
            out["sub_queries"] = dq.sub_queries;
            out["filtered"] = dq.filtered;
            out["degraded"] = dq.degraded;
            return out;
        },
        py::arg("query"), py::arg("script"), py::arg("prefix") = kDefaultInitialPrefix,
        "Decompose against a scripted mock LLM: render, parse, filter.");

    m.def(
        "hit_at_k",
        [](const std::set<std::string>& gold, const std::vector<std::string>& retrieved, int k) {
            EvalRecord record;
            record.query_id = "q";
            record.gold_doc_ids = gold;
            record.retrieved = retrieved;
            return hit_at_k(record, k);
        },
        py::arg("gold_doc_ids"), py::arg("retrieved"), py::arg("k"));

    m.def("exact_match", &exact_match, py::arg("gold"), py::arg("predicted"));
    m.def("normalize_answer", &normalize_answer, py::arg("answer"));

    m.def(
        "run_theorem_suite",
        [](int seeds, int n_min, int n_max, double alpha, int tau, std::uint64_t base_seed) {
            SyntheticSuiteConfig config;
            config.seeds = seeds;
            config.n_min = n_min;
            config.n_max = n_max;
            config.alpha = alpha;
            config.tau = tau;
            config.base_seed = base_seed;
            const auto result = run_theorem_suite(config);
            py::dict out;
            out["total"] = result.total;
            out["bound_satisfied"] = result.bound_satisfied;
            out["lemma_satisfied"] = result.lemma_satisfied;
            out["all_hold"] = result.all_hold();
            return out;
        },
        py::arg("seeds") = 10, py::arg("n_min") = 4, py::arg("n_max") = 16,
        py::arg("alpha") = 0.02, py::arg("tau") = 3, py::arg("base_seed") = 1,
        "Alternating-training convergence-bound verification over seeded instances.");

    m.attr("DEFAULT_TASK_DESCRIPTION") = kDefaultTaskDescription;
    m.attr("DEFAULT_INITIAL_PREFIX") = kDefaultInitialPrefix;

#ifdef POQD_VERSION
#define POQD_STR2(x) #x
#define POQD_STR(x) POQD_STR2(x)
    m.attr("__version__") = POQD_STR(POQD_VERSION);
#else
    m.attr("__version__") = "dev";
#endif
}
