#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "retbias/retrievability.hpp"

namespace retbias {

/// Inequality of a non-negative score vector, computed on an ascending sort:
/// G = sum_i (2i - N - 1) * r_i / (N * sum_j r_j), i counted from 1.
/// Ranges over [0, (N-1)/N]; invariant under positive rescaling.
double gini(std::vector<double> scores);

struct LorenzPoint {
    double pop_frac = 0.0;    // cumulative share of documents
    double score_frac = 0.0;  // cumulative share of total score
};

/// Cumulative score distribution over documents sorted ascending. Starts at
/// (0,0), ends at (1,1); both coordinates non-decreasing, curve convex.
struct LorenzCurve {
    std::vector<LorenzPoint> points;
};

/// resolution > 0 downsamples to about that many points for plotting,
/// always keeping both endpoints.
LorenzCurve lorenz(std::vector<double> scores, std::size_t resolution = 0);

/// Product-moment correlation of two aligned score vectors.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Tie-corrected rank correlation (tau-b), O(n log n). Retrievability
/// vectors carry large blocks of tied zeros, so the tie correction matters.
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> pearson;  // symmetric, unit diagonal
    std::vector<std::vector<double>> kendall;
};

/// Pairwise correlations between vectors over the same document set,
/// aligned strictly by doc_id.
CorrelationMatrix correlate_all(const std::vector<RetrievabilityVector>& vectors,
                                const std::vector<std::string>& labels);

struct BiasReport {
    std::string provenance;
    std::size_t n_docs = 0;
    double total_mass = 0.0;
    double gini = 0.0;
    LorenzCurve lorenz;
};

BiasReport bias_report(const RetrievabilityVector& v, std::size_t lorenz_resolution = 0);

void save_lorenz_csv(const LorenzCurve& curve, const std::string& path);
/// lorenz_csv is the path recorded inside the report, usually relative to it.
void save_bias_report_json(const BiasReport& report, const std::string& lorenz_csv,
                           const std::string& path);
void save_correlation_json(const CorrelationMatrix& m, const std::string& path);

}  // namespace retbias
