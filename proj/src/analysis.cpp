#include "retbias/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"

namespace retbias {

namespace {

void check_scores(const std::vector<double>& scores, const char* op) {
    if (scores.empty()) throw DataError(std::string(op) + ": empty score vector");
    for (double s : scores)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw DataError(std::string(op) + ": negative or non-finite score");
}

}  // namespace

double gini(std::vector<double> scores) {
    check_scores(scores, "gini");
    std::stable_sort(scores.begin(), scores.end());
    const std::size_t n = scores.size();
    // A constant vector has Gini 0 by definition; the weighted sum below
    // only cancels to ~1 ulp of it, which can land on either side of zero.
    if (scores.front() == scores.back()) {
        if (scores.back() == 0.0) throw DataError("undefined Gini (zero mass)");
        return 0.0;
    }
    double total = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        total += scores[i];
        weighted += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) * scores[i];
    }
    if (total == 0.0) throw DataError("undefined Gini (zero mass)");
    return weighted / (static_cast<double>(n) * total);
}

LorenzCurve lorenz(std::vector<double> scores, std::size_t resolution) {
    check_scores(scores, "lorenz");
    std::stable_sort(scores.begin(), scores.end());
    const std::size_t n = scores.size();

    std::vector<double> cumulative(n);
    double running = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        running += scores[i];
        cumulative[i] = running;
    }
    if (running == 0.0) throw DataError("undefined Lorenz curve (zero mass)");

    LorenzCurve curve;
    curve.points.push_back({0.0, 0.0});
    auto emit = [&](std::size_t i) {  // i in 1..n
        curve.points.push_back({static_cast<double>(i) / static_cast<double>(n),
                                cumulative[i - 1] / running});
    };
    if (resolution == 0 || resolution >= n) {
        for (std::size_t i = 1; i <= n; i++) emit(i);
    } else {
        std::size_t last = 0;
        for (std::size_t j = 1; j <= resolution; j++) {
            std::size_t i = j * n / resolution;
            if (i > last) emit(i);
            last = i;
        }
    }
    return curve;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DataError("pearson: input lengths differ");
    const std::size_t n = x.size();
    if (n < 2) throw DataError("pearson: need at least 2 observations");

    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        sum_x += x[i];
        sum_y += y[i];
    }
    const double mean_x = sum_x / static_cast<double>(n);
    const double mean_y = sum_y / static_cast<double>(n);

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0) throw DataError("pearson undefined: left input has zero variance");
    if (syy == 0.0) throw DataError("pearson undefined: right input has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

// Pairs (i, j), i < j, with v[i] > v[j], counted during a merge sort.
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[i] <= v[j]) {
            buf[k++] = v[i++];
        } else {
            count += mid - i;
            buf[k++] = v[j++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
              buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

std::uint64_t tied_pairs(const std::vector<double>& sorted_keys) {
    std::uint64_t pairs = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted_keys.size(); i++) {
        if (i < sorted_keys.size() && sorted_keys[i] == sorted_keys[i - 1]) {
            run++;
        } else {
            pairs += static_cast<std::uint64_t>(run) * (run - 1) / 2;
            run = 1;
        }
    }
    return pairs;
}

}  // namespace

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DataError("kendall tau: input lengths differ");
    const std::size_t n = x.size();
    if (n < 2) throw DataError("kendall tau: need at least 2 observations");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;

    // Tie masses: pairs tied in x (n1), in y (n2), in both (n3).
    std::uint64_t n1 = 0, n3 = 0;
    {
        std::size_t run_x = 1, run_xy = 1;
        for (std::size_t i = 1; i <= n; i++) {
            bool same_x = i < n && x[order[i]] == x[order[i - 1]];
            bool same_xy = same_x && y[order[i]] == y[order[i - 1]];
            if (same_x) run_x++;
            else {
                n1 += static_cast<std::uint64_t>(run_x) * (run_x - 1) / 2;
                run_x = 1;
            }
            if (same_xy) run_xy++;
            else {
                n3 += static_cast<std::uint64_t>(run_xy) * (run_xy - 1) / 2;
                run_xy = 1;
            }
        }
    }
    std::vector<double> y_sorted(y);
    std::sort(y_sorted.begin(), y_sorted.end());
    const std::uint64_t n2 = tied_pairs(y_sorted);

    if (n1 == n0) throw DataError("kendall tau undefined: left input is constant");
    if (n2 == n0) throw DataError("kendall tau undefined: right input is constant");

    // y values in (x, y) order; inversions among them are discordant pairs.
    std::vector<double> y_in_x_order(n);
    for (std::size_t i = 0; i < n; i++) y_in_x_order[i] = y[order[i]];
    std::vector<double> buf(n);
    const std::uint64_t discordant = count_inversions(y_in_x_order, buf, 0, n);

    const std::int64_t concordant_minus_discordant =
        static_cast<std::int64_t>(n0) - static_cast<std::int64_t>(n1) -
        static_cast<std::int64_t>(n2) + static_cast<std::int64_t>(n3) -
        2 * static_cast<std::int64_t>(discordant);
    return static_cast<double>(concordant_minus_discordant) /
           std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

namespace {

std::string doc_set_difference(const RetrievabilityVector& a, const RetrievabilityVector& b,
                               const std::string& label_a, const std::string& label_b) {
    auto list_only_in = [](const std::vector<std::string>& lhs,
                           const std::vector<std::string>& rhs) {
        std::vector<std::string> only;
        std::set_difference(lhs.begin(), lhs.end(), rhs.begin(), rhs.end(),
                            std::back_inserter(only));
        std::string out;
        const std::size_t shown = std::min<std::size_t>(only.size(), 5);
        for (std::size_t i = 0; i < shown; i++) {
            if (i) out += ", ";
            out += only[i];
        }
        if (only.size() > shown)
            out += " (+" + std::to_string(only.size() - shown) + " more)";
        return out.empty() ? std::string("none") : out;
    };
    return "correlate_all: document sets differ between " + label_a + " and " + label_b +
           "; only in " + label_a + ": " + list_only_in(a.doc_ids, b.doc_ids) + "; only in " +
           label_b + ": " + list_only_in(b.doc_ids, a.doc_ids);
}

}  // namespace

CorrelationMatrix correlate_all(const std::vector<RetrievabilityVector>& vectors,
                                const std::vector<std::string>& labels) {
    if (vectors.empty()) throw ConfigError("correlate_all: need at least one vector");
    if (labels.size() != vectors.size())
        throw ConfigError("correlate_all: need one label per vector");
    for (const auto& v : vectors)
        if (v.doc_ids.size() != v.scores.size())
            throw DataError("correlate_all: malformed retrievability vector");
    for (std::size_t i = 1; i < vectors.size(); i++)
        if (vectors[i].doc_ids != vectors[0].doc_ids)
            throw DataError(doc_set_difference(vectors[0], vectors[i], labels[0], labels[i]));

    const std::size_t n = vectors.size();
    CorrelationMatrix m;
    m.labels = labels;
    m.pearson.assign(n, std::vector<double>(n, 1.0));
    m.kendall.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = i + 1; j < n; j++) {
            const double p = pearson(vectors[i].scores, vectors[j].scores);
            const double k = kendall_tau_b(vectors[i].scores, vectors[j].scores);
            m.pearson[i][j] = m.pearson[j][i] = p;
            m.kendall[i][j] = m.kendall[j][i] = k;
        }
    }
    return m;
}

BiasReport bias_report(const RetrievabilityVector& v, std::size_t lorenz_resolution) {
    if (v.doc_ids.size() != v.scores.size())
        throw DataError("bias report: malformed retrievability vector");
    BiasReport report;
    report.provenance = v.meta.provenance;
    report.n_docs = v.scores.size();
    report.total_mass = std::accumulate(v.scores.begin(), v.scores.end(), 0.0);
    report.gini = gini(v.scores);
    report.lorenz = lorenz(v.scores, lorenz_resolution);
    return report;
}

void save_lorenz_csv(const LorenzCurve& curve, const std::string& path) {
    std::string out = "pop_frac,score_frac\n";
    for (const auto& p : curve.points) {
        out += format_double(p.pop_frac);
        out += ',';
        out += format_double(p.score_frac);
        out += '\n';
    }
    write_file_atomic(path, out);
}

void save_bias_report_json(const BiasReport& report, const std::string& lorenz_csv,
                           const std::string& path) {
    nlohmann::json j{
        {"provenance", report.provenance},
        {"n_docs", report.n_docs},
        {"total_mass", format_double(report.total_mass)},
        {"gini", format_double(report.gini)},
        {"lorenz_csv", lorenz_csv},
    };
    write_file_atomic(path, j.dump(2) + "\n");
}

void save_correlation_json(const CorrelationMatrix& m, const std::string& path) {
    auto matrix_json = [](const std::vector<std::vector<double>>& rows) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& row : rows) {
            nlohmann::json r = nlohmann::json::array();
            for (double v : row) r.push_back(format_double(v));
            out.push_back(std::move(r));
        }
        return out;
    };
    nlohmann::json j{
        {"labels", m.labels},
        {"pearson", matrix_json(m.pearson)},
        {"kendall", matrix_json(m.kendall)},
    };
    write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace retbias
