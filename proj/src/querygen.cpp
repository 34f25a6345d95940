#include "retbias/querygen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"

namespace retbias {

namespace {

std::string gen_fingerprint(std::string_view method, const nlohmann::json& config,
                            const InvertedIndex& idx) {
    return queryset_fingerprint(method, config.dump(), idx.preprocess_fingerprint(),
                                idx.corpus_digest());
}

void check_same_corpus(const std::vector<Document>& docs, const InvertedIndex& idx) {
    if (corpus_digest(docs) != idx.corpus_digest())
        throw DataError("document stream does not match the index corpus digest");
}

}  // namespace

void Sq1Config::validate() const {
    if (min_unigram_cf < 1 || min_bigram_cf < 1 || max_bigrams < 1)
        throw ConfigError("sq1 thresholds must be positive");
}

void Sq2Config::validate() const {
    if (max_terms < 1 || max_terms > 4) throw ConfigError("sq2.max_terms must be in 1..4");
    if (!(df_ceiling_fraction > 0.0 && df_ceiling_fraction <= 1.0))
        throw ConfigError("sq2.df_ceiling_fraction must be in (0,1]");
    if (min_within_doc_tf < 1) throw ConfigError("sq2.min_within_doc_tf must be positive");
    if (per_doc_cap < 1) throw ConfigError("sq2.per_doc_cap must be positive");
}

void Sq3Config::validate() const {
    if (terms_per_cluster < 1) throw ConfigError("sq3.terms_per_cluster must be positive");
    if (kmeans_max_iters < 1) throw ConfigError("sq3.kmeans_max_iters must be positive");
}

QuerySet generate_sq1(const std::vector<Document>& docs, const InvertedIndex& idx,
                      const Sq1Config& cfg) {
    cfg.validate();
    check_same_corpus(docs, idx);
    QuerySet qs;
    qs.provenance = "SQ1";
    qs.config_fingerprint = gen_fingerprint(
        "sq1",
        {{"min_unigram_cf", cfg.min_unigram_cf},
         {"min_bigram_cf", cfg.min_bigram_cf},
         {"max_bigrams", cfg.max_bigrams}},
        idx);
    qs.preprocess_fingerprint = idx.preprocess_fingerprint();
    qs.corpus_digest = idx.corpus_digest();

    for (const auto& [term, tid] : idx.lexicon())
        if (idx.stats(tid).cf >= cfg.min_unigram_cf)
            qs.queries.push_back({{term}, 1.0, QueryMode::disjunctive});

    std::map<std::pair<std::string, std::string>, std::uint64_t> bigram_freq;
    for (const auto& d : docs)
        for (std::size_t i = 0; i + 1 < d.terms.size(); i++)
            bigram_freq[{d.terms[i], d.terms[i + 1]}]++;

    std::vector<std::pair<const std::pair<std::string, std::string>*, std::uint64_t>> ranked;
    for (const auto& [pair, freq] : bigram_freq)
        if (freq >= cfg.min_bigram_cf) ranked.emplace_back(&pair, freq);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return *a.first < *b.first;
    });
    if (ranked.size() > cfg.max_bigrams) ranked.resize(cfg.max_bigrams);
    for (const auto& [pair, freq] : ranked)
        qs.queries.push_back({{pair->first, pair->second}, 1.0, QueryMode::disjunctive});
    return qs;
}

QuerySet generate_sq2(const std::vector<Document>& docs, const InvertedIndex& idx,
                      const Sq2Config& cfg, std::vector<std::string>* warnings) {
    cfg.validate();
    check_same_corpus(docs, idx);
    QuerySet qs;
    qs.provenance = "SQ2";
    qs.config_fingerprint = gen_fingerprint(
        "sq2",
        {{"min_within_doc_tf", cfg.min_within_doc_tf},
         {"max_terms", cfg.max_terms},
         {"df_ceiling_fraction", cfg.df_ceiling_fraction},
         {"per_doc_cap", cfg.per_doc_cap}},
        idx);
    qs.preprocess_fingerprint = idx.preprocess_fingerprint();
    qs.corpus_digest = idx.corpus_digest();

    double df_ceiling = cfg.df_ceiling_fraction * static_cast<double>(idx.n_docs());
    std::set<std::vector<std::string>> seen;
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& d : docs) {
        tf.clear();
        for (const auto& t : d.terms) tf[t]++;
        std::vector<std::string> eligible;
        for (const auto& [t, count] : tf) {
            if (count < cfg.min_within_doc_tf) continue;
            auto tid = idx.term_id(t);
            if (static_cast<double>(idx.stats(*tid).df) > df_ceiling) continue;
            eligible.push_back(t);
        }
        std::sort(eligible.begin(), eligible.end());

        std::size_t enumerated = 0;
        bool capped = false;
        std::vector<std::size_t> pick;
        for (std::size_t size = 1; size <= cfg.max_terms && !capped; size++) {
            if (eligible.size() < size) break;
            // lexicographic combinations of `size` indices
            pick.assign(size, 0);
            std::iota(pick.begin(), pick.end(), 0);
            while (true) {
                if (enumerated == cfg.per_doc_cap) {
                    capped = true;
                    break;
                }
                enumerated++;
                std::vector<std::string> combo;
                combo.reserve(size);
                for (std::size_t i : pick) combo.push_back(eligible[i]);
                if (seen.insert(combo).second)
                    qs.queries.push_back({std::move(combo), 1.0, QueryMode::conjunctive});
                // advance to next combination
                std::size_t j = size;
                while (j > 0 && pick[j - 1] == eligible.size() - size + j - 1) j--;
                if (j == 0) break;
                pick[j - 1]++;
                for (std::size_t i = j; i < size; i++) pick[i] = pick[i - 1] + 1;
            }
        }
        if (capped && warnings)
            warnings->push_back("sq2: document " + d.doc_id + " hit the per-document cap of " +
                                std::to_string(cfg.per_doc_cap) + " combinations; excess skipped");
    }
    return qs;
}

double relative_entropy_term_score(double p_source, double p_corpus) {
    return p_source * std::log(p_source / p_corpus);
}

std::vector<std::uint32_t> kmeans_cluster_docs(const std::vector<Document>& docs,
                                               const InvertedIndex& idx, std::size_t k,
                                               std::uint64_t seed, std::size_t max_iters) {
    std::size_t n = docs.size();
    if (k < 1) throw ConfigError("num_clusters must be >= 1");
    if (k > n) throw ConfigError("num_clusters exceeds document count");
    std::size_t v = idx.vocab_size();

    // unit-normalized tf-idf vectors, sparse, tids ascending
    std::vector<std::vector<std::pair<std::uint32_t, double>>> vecs(n);
    {
        std::map<std::uint32_t, std::uint32_t> tf;
        for (std::size_t d = 0; d < n; d++) {
            tf.clear();
            for (const auto& t : docs[d].terms) tf[*idx.term_id(t)]++;
            double norm2 = 0.0;
            for (const auto& [tid, count] : tf) {
                double w = static_cast<double>(count) * idx.idf(tid);
                vecs[d].emplace_back(tid, w);
                norm2 += w * w;
            }
            if (norm2 > 0.0) {
                double inv = 1.0 / std::sqrt(norm2);
                for (auto& [tid, w] : vecs[d]) w *= inv;
            }
        }
    }

    // initial centroids: k distinct documents picked by a partial
    // Fisher-Yates shuffle (mt19937_64 output is standardized, so this is
    // reproducible across standard libraries, unlike std::sample)
    std::vector<std::uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::uint32_t> init(k);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; i++) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(pool[i], pool[j]);
        init[i] = pool[i];
    }

    std::vector<std::vector<double>> centroids(k, std::vector<double>(v, 0.0));
    for (std::size_t c = 0; c < k; c++)
        for (const auto& [tid, w] : vecs[init[c]]) centroids[c][tid] = w;

    std::vector<std::uint32_t> assign(n, 0);
    std::vector<double> cnorm2(k);
    std::vector<std::size_t> members(k);
    for (std::size_t iter = 0; iter < max_iters; iter++) {
        for (std::size_t c = 0; c < k; c++) {
            double s = 0.0;
            for (double x : centroids[c]) s += x * x;
            cnorm2[c] = s;
        }
        bool changed = false;
        for (std::size_t d = 0; d < n; d++) {
            std::uint32_t best = 0;
            double best_dist = 0.0;
            for (std::size_t c = 0; c < k; c++) {
                double dot = 0.0;
                for (const auto& [tid, w] : vecs[d]) dot += w * centroids[c][tid];
                double dist = cnorm2[c] - 2.0 * dot;  // |x|^2 constant per doc
                if (c == 0 || dist < best_dist) {
                    best_dist = dist;
                    best = static_cast<std::uint32_t>(c);
                }
            }
            if (assign[d] != best) {
                assign[d] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        std::fill(members.begin(), members.end(), 0);
        std::vector<std::vector<double>> sums(k, std::vector<double>(v, 0.0));
        for (std::size_t d = 0; d < n; d++) {
            members[assign[d]]++;
            for (const auto& [tid, w] : vecs[d]) sums[assign[d]][tid] += w;
        }
        for (std::size_t c = 0; c < k; c++) {
            if (members[c] == 0) continue;  // empty cluster keeps its centroid
            double inv = 1.0 / static_cast<double>(members[c]);
            for (std::size_t t = 0; t < v; t++) centroids[c][t] = sums[c][t] * inv;
        }
    }
    return assign;
}

QuerySet generate_sq3(const std::vector<Document>& docs, const InvertedIndex& idx,
                      const Sq3Config& cfg, std::vector<std::string>* warnings) {
    cfg.validate();
    check_same_corpus(docs, idx);
    QuerySet qs;
    qs.provenance = "SQ3";
    std::size_t n = docs.size();
    std::size_t k = cfg.num_clusters != 0 ? cfg.num_clusters : std::max<std::size_t>(1, (n + 999) / 1000);
    qs.config_fingerprint = gen_fingerprint(
        "sq3",
        {{"num_clusters", k},
         {"terms_per_cluster", cfg.terms_per_cluster},
         {"seed", cfg.seed},
         {"kmeans_max_iters", cfg.kmeans_max_iters}},
        idx);
    qs.preprocess_fingerprint = idx.preprocess_fingerprint();
    qs.corpus_digest = idx.corpus_digest();
    if (n == 0) return qs;

    std::vector<std::uint32_t> assign = kmeans_cluster_docs(docs, idx, k, cfg.seed,
                                                            cfg.kmeans_max_iters);

    std::uint64_t corpus_total = 0;
    for (const auto& [term, tid] : idx.lexicon()) corpus_total += idx.stats(tid).cf;

    std::set<std::vector<std::string>> seen;
    std::map<std::string, std::uint64_t> cluster_cf;
    for (std::size_t c = 0; c < k; c++) {
        cluster_cf.clear();
        std::uint64_t cluster_total = 0;
        for (std::size_t d = 0; d < n; d++) {
            if (assign[d] != c) continue;
            for (const auto& t : docs[d].terms) {
                cluster_cf[t]++;
                cluster_total++;
            }
        }
        if (cluster_total == 0) {
            if (warnings)
                warnings->push_back("sq3: cluster " + std::to_string(c) +
                                    " is empty; skipped");
            continue;
        }
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(cluster_cf.size());
        for (const auto& [t, cnt] : cluster_cf) {
            double p_s = static_cast<double>(cnt) / static_cast<double>(cluster_total);
            double p_c = static_cast<double>(idx.stats(*idx.term_id(t)).cf) /
                         static_cast<double>(corpus_total);
            scored.emplace_back(t, relative_entropy_term_score(p_s, p_c));
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (scored.size() > cfg.terms_per_cluster) scored.resize(cfg.terms_per_cluster);

        for (const auto& [t, s] : scored) {
            std::vector<std::string> q{t};
            if (seen.insert(q).second)
                qs.queries.push_back({std::move(q), 1.0, QueryMode::disjunctive});
        }
        for (std::size_t i = 0; i + 1 < scored.size(); i++) {
            std::vector<std::string> q{scored[i].first, scored[i + 1].first};
            if (seen.insert(q).second)
                qs.queries.push_back({std::move(q), 1.0, QueryMode::disjunctive});
        }
    }
    return qs;
}

std::vector<std::string> read_query_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open query log: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

LogFilterResult filter_query_log(const std::vector<std::string>& raw_lines,
                                 const InvertedIndex& idx, const PreprocessConfig& pcfg) {
    if (pcfg.fingerprint() != idx.preprocess_fingerprint())
        throw DataError("preprocessing config does not match the index fingerprint");
    LogFilterResult res;
    res.queries.provenance = "LOG";
    res.queries.config_fingerprint =
        gen_fingerprint("log", nlohmann::json::object(), idx);
    res.queries.preprocess_fingerprint = idx.preprocess_fingerprint();
    res.queries.corpus_digest = idx.corpus_digest();

    std::unordered_set<std::string> seen_raw;
    for (const auto& line : raw_lines) {
        if (!seen_raw.insert(line).second) continue;
        if (find_invalid_utf8(line) != std::string_view::npos) {
            res.dropped_unparseable++;
            continue;
        }
        if (line.find('.') != std::string::npos) continue;
        std::vector<std::string> terms = preprocess_text(line, pcfg);
        if (terms.empty() || terms.size() > 4) continue;
        bool in_vocab = true;
        for (const auto& t : terms)
            if (!idx.has_term(t)) {
                in_vocab = false;
                break;
            }
        if (!in_vocab) continue;
        res.queries.queries.push_back({std::move(terms), 1.0, QueryMode::disjunctive});
    }
    return res;
}

}  // namespace retbias
