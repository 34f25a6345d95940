#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "retbias/index.hpp"
#include "retbias/queryset.hpp"

namespace retbias {

enum class UtilityKind { cumulative, gravity };

UtilityKind parse_utility_kind(std::string_view name);
std::string_view utility_kind_name(UtilityKind kind);

/// Rank-discount function f(k): cumulative pays 1 for any rank within the
/// cutoff; gravity pays 1/k^beta, discounting deeper ranks.
struct UtilityFunction {
    UtilityKind kind = UtilityKind::cumulative;
    std::size_t c = 100;  // rank cutoff
    double beta = 2.0;    // gravity exponent

    void validate() const;
    /// Utility of 1-based rank; 0 beyond the cutoff.
    double operator()(std::size_t rank) const;
};

struct VectorMeta {
    std::string provenance;
    std::string queryset_fingerprint;
    std::string preprocess_fingerprint;
    std::string corpus_digest;
    UtilityKind utility = UtilityKind::cumulative;
    std::size_t c = 100;
    double beta = 2.0;
    double k1 = 1.2;
    double b = 0.75;
    std::uint64_t query_count = 0;
    std::uint64_t total_hits = 0;  // result entries within the cutoff, all queries

    bool same_run_config(const VectorMeta& other) const;
};

/// Canonical form: doc ids ascending, scores parallel.
struct RetrievabilityVector {
    std::vector<std::string> doc_ids;
    std::vector<double> scores;
    VectorMeta meta;
};

struct AccumulateOptions {
    std::size_t workers = 1;
    /// Queries per superstep block; 0 means one block for the whole set.
    /// Worker states are merged at every block boundary in shard order, so
    /// results do not depend on the worker count (exactly so for integer
    /// query weights).
    std::size_t checkpoint_interval = 0;
    std::string checkpoint_path;  // empty disables checkpointing
    bool resume = false;
    /// Abort after this many completed blocks (0 = run to completion).
    /// Simulates an interrupted run when exercising resume.
    std::size_t stop_after_blocks = 0;
};

/// Runs every query at cutoff u.c and accumulates weighted rank utility per
/// document. Refuses query sets whose preprocessing fingerprint or corpus
/// digest disagree with the index.
RetrievabilityVector accumulate(const InvertedIndex& idx, const Bm25Params& params,
                                const QuerySet& qs, const UtilityFunction& u,
                                const AccumulateOptions& opts = {});

/// Pointwise sum of two vectors over the same corpus and run configuration.
RetrievabilityVector merge(const RetrievabilityVector& a, const RetrievabilityVector& b);

/// CSV with a '#' metadata header; rows doc_id,score in doc id order.
/// Scores print in shortest round-trip form, so save/load is lossless.
void save_vector_csv(const RetrievabilityVector& v, const std::string& path);
RetrievabilityVector load_vector_csv(const std::string& path);

}  // namespace retbias
