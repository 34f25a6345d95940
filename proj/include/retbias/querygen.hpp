#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retbias/index.hpp"
#include "retbias/queryset.hpp"

namespace retbias {

struct Sq1Config {
    std::uint64_t min_unigram_cf = 6;  // "more than 5 occurrences"
    std::uint64_t min_bigram_cf = 20;
    std::size_t max_bigrams = 2000000;

    void validate() const;
};

struct Sq2Config {
    std::uint32_t min_within_doc_tf = 2;
    std::size_t max_terms = 4;
    double df_ceiling_fraction = 0.25;
    std::size_t per_doc_cap = 50000;

    void validate() const;
};

struct Sq3Config {
    std::size_t num_clusters = 0;  // 0 = ceil(N/1000), min 1
    std::size_t terms_per_cluster = 10;
    std::uint64_t seed = 42;
    std::size_t kmeans_max_iters = 50;

    void validate() const;
};

/// Unigrams with cf >= min_unigram_cf (lexicographic order), then adjacent
/// bigrams from the preprocessed term sequences with pair frequency >=
/// min_bigram_cf, ranked by frequency descending (ties lexicographic) and
/// truncated at max_bigrams. All disjunctive, weight 1.
QuerySet generate_sq1(const std::vector<Document>& docs, const InvertedIndex& idx,
                      const Sq1Config& cfg);

/// Per document: terms with within-doc tf >= min_within_doc_tf and df <=
/// df_ceiling_fraction * N; all term-set combinations of size 1..max_terms,
/// conjunctive, deduplicated globally by term set. Documents whose
/// combination count exceeds per_doc_cap contribute only the first
/// per_doc_cap combinations and a warning.
QuerySet generate_sq2(const std::vector<Document>& docs, const InvertedIndex& idx,
                      const Sq2Config& cfg, std::vector<std::string>* warnings = nullptr);

/// Clusters tf-idf document vectors (k-means, fixed seed), scores each
/// cluster's terms by p_s(t)·ln(p_s(t)/p_c(t)) against the corpus model,
/// keeps the top terms_per_cluster, and emits singles plus consecutive
/// ranked pairs as disjunctive queries, deduplicated globally.
QuerySet generate_sq3(const std::vector<Document>& docs, const InvertedIndex& idx,
                      const Sq3Config& cfg, std::vector<std::string>* warnings = nullptr);

/// Relative-entropy contribution of one term: p_s · ln(p_s / p_c).
double relative_entropy_term_score(double p_source, double p_corpus);

struct LogFilterResult {
    QuerySet queries;
    std::size_t dropped_unparseable = 0;  // invalid UTF-8 lines
};

/// Deduplicates exact raw strings, drops queries containing '.', then keeps
/// queries whose preprocessed form has 1..4 terms, all present in the
/// index lexicon. Disjunctive, weight 1.
LogFilterResult filter_query_log(const std::vector<std::string>& raw_lines,
                                 const InvertedIndex& idx, const PreprocessConfig& pcfg);

/// Reads one raw query per line.
std::vector<std::string> read_query_log(const std::string& path);

/// Deterministic k-means over sparse tf-idf document vectors. Returns the
/// cluster assignment per document. Exposed for direct testing.
std::vector<std::uint32_t> kmeans_cluster_docs(const std::vector<Document>& docs,
                                               const InvertedIndex& idx, std::size_t k,
                                               std::uint64_t seed, std::size_t max_iters);

}  // namespace retbias
