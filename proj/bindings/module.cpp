#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "retbias/analysis.hpp"
#include "retbias/common.hpp"
#include "retbias/corpus.hpp"
#include "retbias/index.hpp"
#include "retbias/postag.hpp"
#include "retbias/querygen.hpp"
#include "retbias/queryset.hpp"
#include "retbias/retrievability.hpp"
#include "retbias/text.hpp"

namespace py = pybind11;

namespace {

using RawDocs = std::vector<std::pair<std::string, std::string>>;
// (terms, mode, weight)
using PyQuery = std::tuple<std::vector<std::string>, std::string, double>;

retbias::PreprocessConfig make_pcfg(bool stemming) {
    retbias::PreprocessConfig cfg;
    cfg.stemming = stemming;
    return cfg;
}

std::vector<retbias::Document> prep_docs(const RawDocs& raw, const retbias::PreprocessConfig& pcfg) {
    std::vector<retbias::Document> docs;
    docs.reserve(raw.size());
    for (const auto& [id, text] : raw)
        docs.push_back(retbias::preprocess(retbias::RawDocument{id, text}, pcfg));
    return docs;
}

/// Index plus the preprocessing choice it was built with, so query-log
/// filtering can reuse the same pipeline.
struct PyIndex {
    retbias::InvertedIndex idx;
    bool stemming = true;
};

std::vector<PyQuery> to_py_queries(const retbias::QuerySet& qs) {
    std::vector<PyQuery> out;
    out.reserve(qs.queries.size());
    for (const auto& q : qs.queries)
        out.emplace_back(q.terms,
                         q.mode == retbias::QueryMode::disjunctive ? "disjunctive" : "conjunctive",
                         q.weight);
    return out;
}

/// Accepts each query as either a list of term strings or a
/// (terms, mode, weight) tuple.
retbias::QuerySet queries_from_py(const py::sequence& queries) {
    retbias::QuerySet qs;
    qs.provenance = "PY";
    for (const auto& item : queries) {
        if (py::isinstance<py::str>(item))
            throw py::value_error("a query is a list of terms, not a bare string");
        retbias::Query q;
        auto seq = py::reinterpret_borrow<py::sequence>(item);
        if (seq.size() == 0) throw py::value_error("empty query");
        if (py::isinstance<py::str>(seq[0])) {
            q.terms = seq.cast<std::vector<std::string>>();
        } else {
            auto [terms, mode, weight] = item.cast<PyQuery>();
            q.terms = std::move(terms);
            q.mode = retbias::parse_query_mode(mode);
            q.weight = weight;
        }
        qs.queries.push_back(std::move(q));
    }
    return qs;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Retrievability bias toolkit core";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const retbias::Error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("tokenize", &retbias::tokenize, py::arg("text"));
    m.def("porter_stem", &retbias::porter_stem, py::arg("token"));
    m.def("smart_stopwords", [] {
        return std::vector<std::string>(retbias::smart_stopwords().begin(),
                                        retbias::smart_stopwords().end());
    });
    m.def(
        "preprocess",
        [](const std::string& text, bool stemming) {
            return retbias::preprocess_text(text, make_pcfg(stemming));
        },
        py::arg("text"), py::arg("stemming") = true,
        "Tokenize, drop stopwords, and stem, matching the indexing pipeline.");

    py::class_<PyIndex>(m, "Index", "In-memory BM25 inverted index over (doc_id, text) pairs")
        .def_static(
            "build",
            [](const RawDocs& docs, bool stemming) {
                auto pcfg = make_pcfg(stemming);
                return PyIndex{retbias::InvertedIndex::build(prep_docs(docs, pcfg),
                                                             pcfg.fingerprint()),
                               stemming};
            },
            py::arg("docs"), py::arg("stemming") = true)
        .def_static(
            "load",
            [](const std::string& dir, bool stemming) {
                return PyIndex{retbias::InvertedIndex::load(dir), stemming};
            },
            py::arg("dir"), py::arg("stemming") = true,
            "Load a snapshot; pass the stemming setting it was built with.")
        .def("save", [](const PyIndex& i, const std::string& dir) { i.idx.save(dir); },
             py::arg("dir"))
        .def_property_readonly("n_docs", [](const PyIndex& i) { return i.idx.n_docs(); })
        .def_property_readonly("avgdl", [](const PyIndex& i) { return i.idx.avgdl(); })
        .def_property_readonly("vocab_size", [](const PyIndex& i) { return i.idx.vocab_size(); })
        .def("has_term",
             [](const PyIndex& i, const std::string& term) { return i.idx.has_term(term); },
             py::arg("term"))
        .def(
            "bm25_score",
            [](const PyIndex& i, const std::vector<std::string>& terms, const std::string& doc_id,
               double k1, double b) {
                auto internal = i.idx.internal_id(doc_id);
                if (!internal) throw py::key_error("no document " + doc_id);
                return i.idx.bm25_score(retbias::Bm25Params{k1, b}, terms, *internal);
            },
            py::arg("terms"), py::arg("doc_id"), py::arg("k1") = 1.2, py::arg("b") = 0.75)
        .def(
            "retrieve",
            [](const PyIndex& i, const std::vector<std::string>& terms, std::size_t cutoff,
               const std::string& mode, double k1, double b) {
                auto rl = i.idx.retrieve(retbias::Bm25Params{k1, b}, terms, cutoff,
                                         retbias::parse_query_mode(mode));
                std::vector<std::pair<std::string, double>> out;
                out.reserve(rl.entries.size());
                for (const auto& e : rl.entries) out.emplace_back(e.doc_id, e.score);
                return out;
            },
            py::arg("terms"), py::arg("cutoff") = 100, py::arg("mode") = "disjunctive",
            py::arg("k1") = 1.2, py::arg("b") = 0.75,
            "Top-cutoff (doc_id, score) pairs, best first.");

    m.def(
        "accumulate",
        [](const PyIndex& index, const py::sequence& queries, std::size_t cutoff,
           const std::string& utility, double beta, double k1, double b, std::size_t workers) {
            retbias::QuerySet qs = queries_from_py(queries);
            qs.preprocess_fingerprint = index.idx.preprocess_fingerprint();
            qs.corpus_digest = index.idx.corpus_digest();
            retbias::UtilityFunction u;
            u.kind = retbias::parse_utility_kind(utility);
            u.c = cutoff;
            u.beta = beta;
            retbias::AccumulateOptions opts;
            opts.workers = workers;
            auto v = retbias::accumulate(index.idx, retbias::Bm25Params{k1, b}, qs, u, opts);
            py::dict out;
            for (std::size_t i = 0; i < v.doc_ids.size(); i++)
                out[py::str(v.doc_ids[i])] = v.scores[i];
            return out;
        },
        py::arg("index"), py::arg("queries"), py::arg("cutoff") = 100,
        py::arg("utility") = "cumulative", py::arg("beta") = 2.0, py::arg("k1") = 1.2,
        py::arg("b") = 0.75, py::arg("workers") = 1,
        "Retrievability score per document. Each query is a list of already "
        "preprocessed terms, or a (terms, mode, weight) tuple.");

    m.def("gini", &retbias::gini, py::arg("scores"));
    m.def(
        "lorenz",
        [](std::vector<double> scores, std::size_t resolution) {
            auto curve = retbias::lorenz(std::move(scores), resolution);
            std::vector<std::pair<double, double>> pts;
            pts.reserve(curve.points.size());
            for (const auto& p : curve.points) pts.emplace_back(p.pop_frac, p.score_frac);
            return pts;
        },
        py::arg("scores"), py::arg("resolution") = 0,
        "Lorenz curve as (population fraction, score fraction) pairs.");
    m.def("pearson", &retbias::pearson, py::arg("x"), py::arg("y"));
    m.def("kendall_tau_b", &retbias::kendall_tau_b, py::arg("x"), py::arg("y"));

    m.def(
        "pos_tag",
        [](const std::vector<std::string>& tokens) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& t : retbias::pos_tag(tokens))
                out.emplace_back(t.token, std::string(retbias::pos_tag_name(t.tag)));
            return out;
        },
        py::arg("tokens"), "Coarse part-of-speech tag per token.");

    m.def(
        "sq1_queries",
        [](const RawDocs& docs, bool stemming, std::uint64_t min_unigram_cf,
           std::uint64_t min_bigram_cf, std::size_t max_bigrams) {
            auto pcfg = make_pcfg(stemming);
            auto prepped = prep_docs(docs, pcfg);
            auto idx = retbias::InvertedIndex::build(prepped, pcfg.fingerprint());
            retbias::Sq1Config cfg{min_unigram_cf, min_bigram_cf, max_bigrams};
            return to_py_queries(retbias::generate_sq1(prepped, idx, cfg));
        },
        py::arg("docs"), py::arg("stemming") = true, py::arg("min_unigram_cf") = 6,
        py::arg("min_bigram_cf") = 20, py::arg("max_bigrams") = 2000000,
        "Frequency-thresholded unigrams plus top adjacent bigrams.");

    m.def(
        "sq2_queries",
        [](const RawDocs& docs, bool stemming, std::uint32_t min_within_doc_tf,
           std::size_t max_terms, double df_ceiling_fraction, std::size_t per_doc_cap) {
            auto pcfg = make_pcfg(stemming);
            auto prepped = prep_docs(docs, pcfg);
            auto idx = retbias::InvertedIndex::build(prepped, pcfg.fingerprint());
            retbias::Sq2Config cfg;
            cfg.min_within_doc_tf = min_within_doc_tf;
            cfg.max_terms = max_terms;
            cfg.df_ceiling_fraction = df_ceiling_fraction;
            cfg.per_doc_cap = per_doc_cap;
            return to_py_queries(retbias::generate_sq2(prepped, idx, cfg));
        },
        py::arg("docs"), py::arg("stemming") = true, py::arg("min_within_doc_tf") = 2,
        py::arg("max_terms") = 4, py::arg("df_ceiling_fraction") = 0.25,
        py::arg("per_doc_cap") = 50000,
        "Conjunctive combinations of within-document repeated terms.");

    m.def(
        "sq3_queries",
        [](const RawDocs& docs, bool stemming, std::size_t num_clusters,
           std::size_t terms_per_cluster, std::uint64_t seed, std::size_t kmeans_max_iters) {
            auto pcfg = make_pcfg(stemming);
            auto prepped = prep_docs(docs, pcfg);
            auto idx = retbias::InvertedIndex::build(prepped, pcfg.fingerprint());
            retbias::Sq3Config cfg;
            cfg.num_clusters = num_clusters;
            cfg.terms_per_cluster = terms_per_cluster;
            cfg.seed = seed;
            cfg.kmeans_max_iters = kmeans_max_iters;
            return to_py_queries(retbias::generate_sq3(prepped, idx, cfg));
        },
        py::arg("docs"), py::arg("stemming") = true, py::arg("num_clusters") = 0,
        py::arg("terms_per_cluster") = 10, py::arg("seed") = 42,
        py::arg("kmeans_max_iters") = 50,
        "Cluster-discriminative terms from k-means over tf-idf vectors.");

    m.def(
        "rsq_queries",
        [](const RawDocs& docs, bool stemming, std::size_t total_budget) {
            std::vector<retbias::RawDocument> raw;
            raw.reserve(docs.size());
            for (const auto& [id, text] : docs) raw.push_back({id, text});
            retbias::RsqConfig cfg;
            cfg.total_budget = total_budget;
            return to_py_queries(retbias::generate_rsq(raw, cfg, make_pcfg(stemming)));
        },
        py::arg("docs"), py::arg("stemming") = true, py::arg("total_budget") = 10000,
        "Part-of-speech-pattern N-grams, frequency ranked and quota truncated.");

    m.def(
        "filter_query_log",
        [](const std::vector<std::string>& lines, const PyIndex& index) {
            auto res = retbias::filter_query_log(lines, index.idx, make_pcfg(index.stemming));
            return to_py_queries(res.queries);
        },
        py::arg("lines"), py::arg("index"),
        "Keep deduplicated 1-4 term queries fully covered by the index vocabulary.");
}
