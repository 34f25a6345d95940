#pragma once

#include <string>
#include <vector>

#include "retbias/index.hpp"

namespace retbias {

struct Query {
    std::vector<std::string> terms;  // 1..4 entries
    double weight = 1.0;
    QueryMode mode = QueryMode::disjunctive;
};

/// A generated or filtered query collection plus the identities needed to
/// refuse mixing it with an index built under different preprocessing.
struct QuerySet {
    std::vector<Query> queries;
    std::string provenance;  // SQ1 | SQ2 | SQ3 | RSQ | LOG
    std::string config_fingerprint;
    std::string preprocess_fingerprint;
    std::string corpus_digest;
};

/// TSV: comment header (provenance, fingerprints), a column row, then
/// qid / mode (d|c) / weight / space-joined terms.
void save_queryset(const QuerySet& qs, const std::string& path);
QuerySet load_queryset(const std::string& path);

/// Canonical query-set identity: method, serialized generator config, and
/// the preprocessing/corpus identities it was generated against.
std::string queryset_fingerprint(std::string_view method, std::string_view config_dump,
                                 std::string_view preprocess_fp, std::string_view corpus_digest);

}  // namespace retbias
