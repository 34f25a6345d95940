#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "retbias/common.hpp"
#include "retbias/corpus.hpp"
#include "retbias/index.hpp"
#include "retbias/retrievability.hpp"
#include "support.hpp"

using namespace retbias;

namespace {

std::vector<Document> make_docs(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& spec) {
    std::vector<Document> docs;
    for (const auto& [id, terms] : spec) {
        Document d;
        d.doc_id = id;
        d.terms = terms;
        d.length = terms.size();
        docs.push_back(std::move(d));
    }
    return docs;
}

const std::vector<std::pair<std::string, std::vector<std::string>>> kPets = {
    {"d1", {"cat", "cat", "dog"}}, {"d2", {"dog", "mouse"}}};

Query dq(std::vector<std::string> terms, double weight = 1.0) {
    Query q;
    q.terms = std::move(terms);
    q.weight = weight;
    q.mode = QueryMode::disjunctive;
    return q;
}

Query cq(std::vector<std::string> terms, double weight = 1.0) {
    Query q = dq(std::move(terms), weight);
    q.mode = QueryMode::conjunctive;
    return q;
}

QuerySet make_qs(const InvertedIndex& idx, std::vector<Query> queries,
                 std::string provenance = "TEST") {
    QuerySet qs;
    qs.queries = std::move(queries);
    qs.provenance = std::move(provenance);
    qs.config_fingerprint = "cfg-test";
    qs.preprocess_fingerprint = idx.preprocess_fingerprint();
    qs.corpus_digest = idx.corpus_digest();
    return qs;
}

// Naive scorer over the raw document vectors, same shape as the scorer the
// index tests validate against, so rankings agree bit for bit.
double naive_score(const std::vector<Document>& docs, const Bm25Params& params,
                   const std::vector<std::string>& terms, std::size_t doc) {
    double n = static_cast<double>(docs.size());
    std::uint64_t total = 0;
    for (const auto& d : docs) total += d.terms.size();
    double avgdl = static_cast<double>(total) / n;
    double dl = static_cast<double>(docs[doc].terms.size());
    double score = 0.0;
    for (const auto& term : terms) {
        double tf = static_cast<double>(
            std::count(docs[doc].terms.begin(), docs[doc].terms.end(), term));
        if (tf == 0.0) continue;
        std::uint32_t df = 0;
        for (const auto& d : docs)
            if (std::count(d.terms.begin(), d.terms.end(), term) > 0) df++;
        double idf = std::log(1.0 + (n - static_cast<double>(df) + 0.5) /
                                        (static_cast<double>(df) + 0.5));
        double norm = params.k1 * (1.0 - params.b + params.b * (dl / avgdl));
        score += idf * (tf * (params.k1 + 1.0)) / (tf + norm);
    }
    return score;
}

RankedList naive_retrieve(const std::vector<Document>& docs, const Bm25Params& params,
                          const std::vector<std::string>& terms, std::size_t cutoff,
                          QueryMode mode) {
    std::vector<std::string> distinct;
    for (const auto& t : terms)
        if (std::find(distinct.begin(), distinct.end(), t) == distinct.end())
            distinct.push_back(t);

    RankedList result;
    result.cutoff = cutoff;
    for (std::size_t d = 0; d < docs.size(); d++) {
        std::size_t present = 0;
        for (const auto& t : distinct)
            if (std::count(docs[d].terms.begin(), docs[d].terms.end(), t) > 0) present++;
        bool keep = mode == QueryMode::conjunctive ? present == distinct.size() : present > 0;
        if (!keep) continue;
        result.entries.push_back({docs[d].doc_id, naive_score(docs, params, terms, d)});
    }
    std::sort(result.entries.begin(), result.entries.end(),
              [](const RankedEntry& a, const RankedEntry& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.doc_id < b.doc_id;
              });
    if (result.entries.size() > cutoff) result.entries.resize(cutoff);
    return result;
}

struct OracleResult {
    std::map<std::string, double> scores;  // doc_id ascending, like the canonical vector
    std::uint64_t hits = 0;
    double weighted_mass = 0.0;  // sum of weight per returned entry
};

// Independent accumulation: fully rank every document per query, then pay
// weight * utility(rank) for each entry within the cutoff.
OracleResult naive_accumulate(const std::vector<Document>& docs, const Bm25Params& params,
                              const QuerySet& qs, const UtilityFunction& u) {
    OracleResult out;
    for (const auto& d : docs) out.scores[d.doc_id] = 0.0;
    for (const auto& q : qs.queries) {
        RankedList rl = naive_retrieve(docs, params, q.terms, u.c, q.mode);
        for (std::size_t k = 1; k <= rl.entries.size(); k++) {
            out.scores[rl.entries[k - 1].doc_id] += q.weight * u(k);
            out.hits++;
            out.weighted_mass += q.weight;
        }
    }
    return out;
}

void check_matches_oracle_exactly(const RetrievabilityVector& v, const OracleResult& o) {
    REQUIRE(v.doc_ids.size() == o.scores.size());
    REQUIRE(v.scores.size() == v.doc_ids.size());
    std::size_t i = 0;
    for (const auto& [id, score] : o.scores) {
        CHECK(v.doc_ids[i] == id);
        CHECK(v.scores[i] == score);
        i++;
    }
}

void check_matches_oracle_closely(const RetrievabilityVector& v, const OracleResult& o) {
    REQUIRE(v.doc_ids.size() == o.scores.size());
    std::size_t i = 0;
    for (const auto& [id, score] : o.scores) {
        CHECK(v.doc_ids[i] == id);
        CHECK(v.scores[i] == doctest::Approx(score).epsilon(1e-12));
        i++;
    }
}

std::vector<Document> random_docs(std::mt19937_64& rng, std::size_t n_docs, std::size_t vocab) {
    std::vector<std::pair<std::string, std::vector<std::string>>> spec;
    for (std::size_t i = 0; i < n_docs; i++) {
        std::vector<std::string> terms;
        std::size_t len = 3 + rng() % 18;
        for (std::size_t j = 0; j < len; j++)
            terms.push_back("t" + std::to_string(rng() % vocab));
        spec.emplace_back("d" + std::to_string(i), std::move(terms));
    }
    return make_docs(spec);
}

std::vector<Query> random_queries(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
    std::vector<Query> queries;
    for (std::size_t i = 0; i < n; i++) {
        std::vector<std::string> terms;
        std::size_t len = 1 + rng() % 4;
        for (std::size_t j = 0; j < len; j++)
            terms.push_back("t" + std::to_string(rng() % vocab));
        queries.push_back(i % 3 == 0 ? cq(std::move(terms)) : dq(std::move(terms)));
    }
    return queries;
}

}  // namespace

TEST_CASE("utility pays 1 within the cutoff and 0 beyond it") {
    UtilityFunction u;  // cumulative, c=100
    u.validate();
    CHECK(u(5) == 1.0);
    CHECK(u(100) == 1.0);
    CHECK(u(101) == 0.0);
    CHECK(u(1000) == 0.0);
}

TEST_CASE("gravity utility discounts by inverse rank power") {
    UtilityFunction u{UtilityKind::gravity, 100, 2.0};
    u.validate();
    CHECK(u(1) == 1.0);
    CHECK(u(2) == 0.25);
    CHECK(u(3) == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
    CHECK(u(101) == 0.0);

    UtilityFunction linear{UtilityKind::gravity, 100, 1.0};
    CHECK(linear(2) == 0.5);
    CHECK(linear(4) == 0.25);
}

TEST_CASE("utility validation and parsing") {
    CHECK_THROWS_AS((UtilityFunction{UtilityKind::cumulative, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((UtilityFunction{UtilityKind::gravity, 10, 0.0}.validate()), ConfigError);
    CHECK_THROWS_AS((UtilityFunction{UtilityKind::gravity, 10, -1.0}.validate()), ConfigError);
    CHECK_THROWS_AS(
        (UtilityFunction{UtilityKind::gravity, 10, std::numeric_limits<double>::infinity()}
             .validate()),
        ConfigError);
    // beta is ignored for cumulative
    CHECK_NOTHROW((UtilityFunction{UtilityKind::cumulative, 10, 0.0}.validate()));
    CHECK_THROWS_AS(UtilityFunction{}(0), Error);

    CHECK(parse_utility_kind("cumulative") == UtilityKind::cumulative);
    CHECK(parse_utility_kind("gravity") == UtilityKind::gravity);
    CHECK_THROWS_AS(parse_utility_kind("linear"), ConfigError);
    CHECK(utility_kind_name(UtilityKind::cumulative) == "cumulative");
    CHECK(utility_kind_name(UtilityKind::gravity) == "gravity");
}

TEST_CASE("accumulate counts top-c membership on a worked example") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    Bm25Params params;
    auto qs = make_qs(idx, {dq({"cat"}), dq({"dog"}), dq({"mouse"})});

    SUBCASE("cutoff 2 admits both dog matches") {
        auto v = accumulate(idx, params, qs, UtilityFunction{UtilityKind::cumulative, 2});
        REQUIRE(v.doc_ids == std::vector<std::string>{"d1", "d2"});
        CHECK(v.scores == std::vector<double>{2.0, 2.0});
        CHECK(v.meta.query_count == 3);
        CHECK(v.meta.total_hits == 4);
    }
    SUBCASE("cutoff 1 keeps only the top dog match") {
        // On [dog], d2 outscores d1 (shorter document), so d1 loses that hit.
        auto v = accumulate(idx, params, qs, UtilityFunction{UtilityKind::cumulative, 1});
        CHECK(v.scores == std::vector<double>{1.0, 2.0});
        CHECK(v.meta.total_hits == 3);
    }
    SUBCASE("meta carries the run configuration") {
        UtilityFunction u{UtilityKind::gravity, 7, 3.0};
        Bm25Params p{1.6, 0.4};
        auto v = accumulate(idx, p, qs, u);
        CHECK(v.meta.provenance == "TEST");
        CHECK(v.meta.queryset_fingerprint == "cfg-test");
        CHECK(v.meta.preprocess_fingerprint == idx.preprocess_fingerprint());
        CHECK(v.meta.corpus_digest == idx.corpus_digest());
        CHECK(v.meta.utility == UtilityKind::gravity);
        CHECK(v.meta.c == 7);
        CHECK(v.meta.beta == 3.0);
        CHECK(v.meta.k1 == 1.6);
        CHECK(v.meta.b == 0.4);
    }
}

TEST_CASE("gravity accumulation discounts the second rank") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    auto qs = make_qs(idx, {dq({"cat"}), dq({"dog"}), dq({"mouse"})});

    // [cat]: d1 at rank 1. [dog]: d2 rank 1, d1 rank 2. [mouse]: d2 rank 1.
    auto v = accumulate(idx, Bm25Params{}, qs, UtilityFunction{UtilityKind::gravity, 2, 2.0});
    CHECK(v.scores == std::vector<double>{1.25, 2.0});

    auto linear = accumulate(idx, Bm25Params{}, qs, UtilityFunction{UtilityKind::gravity, 2, 1.0});
    CHECK(linear.scores == std::vector<double>{1.5, 2.0});
}

TEST_CASE("query weights scale contributions") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    auto qs = make_qs(idx, {dq({"cat"}, 0.5), dq({"mouse"}, 2.0)});
    auto v = accumulate(idx, Bm25Params{}, qs, UtilityFunction{UtilityKind::cumulative, 2});
    CHECK(v.scores == std::vector<double>{0.5, 2.0});
    // total_hits counts returned entries, independent of weight
    CHECK(v.meta.total_hits == 2);
}

TEST_CASE("a document hit at ranks 1, 50 and 150 scores 2 at cutoff 100") {
    // 149 filler documents with strictly increasing lengths plus one target.
    // u1 appears only in the target; u2 in the 49 shortest fillers and the
    // target; u3 everywhere. Equal tf means rank follows document length.
    std::vector<std::pair<std::string, std::vector<std::string>>> spec;
    for (std::size_t i = 1; i <= 149; i++) {
        std::vector<std::string> terms = {"u3"};
        if (i <= 49) terms.push_back("u2");
        while (terms.size() < 2 + i) terms.push_back("pad");
        std::string id = "d" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
        spec.emplace_back(id, std::move(terms));
    }
    {
        std::vector<std::string> terms = {"u1", "u2", "u3"};
        while (terms.size() < 300) terms.push_back("pad");
        spec.emplace_back("dtarget", std::move(terms));
    }
    auto docs = make_docs(spec);
    auto idx = InvertedIndex::build(docs);
    Bm25Params params;

    auto rank_of = [&](const std::vector<std::string>& terms, const std::string& id) {
        auto rl = naive_retrieve(docs, params, terms, docs.size(), QueryMode::disjunctive);
        for (std::size_t i = 0; i < rl.entries.size(); i++)
            if (rl.entries[i].doc_id == id) return i + 1;
        return std::size_t{0};
    };
    REQUIRE(rank_of({"u1"}, "dtarget") == 1);
    REQUIRE(rank_of({"u2"}, "dtarget") == 50);
    REQUIRE(rank_of({"u3"}, "dtarget") == 150);

    auto qs = make_qs(idx, {dq({"u1"}), dq({"u2"}), dq({"u3"})});
    auto v = accumulate(idx, params, qs, UtilityFunction{UtilityKind::cumulative, 100});
    auto it = std::find(v.doc_ids.begin(), v.doc_ids.end(), "dtarget");
    REQUIRE(it != v.doc_ids.end());
    CHECK(v.scores[static_cast<std::size_t>(it - v.doc_ids.begin())] == 2.0);

    check_matches_oracle_exactly(
        v, naive_accumulate(docs, params, qs, UtilityFunction{UtilityKind::cumulative, 100}));
}

TEST_CASE("empty query set yields an all-zero vector") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    auto v = accumulate(idx, Bm25Params{}, make_qs(idx, {}), UtilityFunction{});
    CHECK(v.doc_ids == std::vector<std::string>{"d1", "d2"});
    CHECK(v.scores == std::vector<double>{0.0, 0.0});
    CHECK(v.meta.query_count == 0);
    CHECK(v.meta.total_hits == 0);
}

TEST_CASE("conjunctive queries with unindexed terms contribute nothing") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    auto qs = make_qs(idx, {cq({"cat", "zebra"}), dq({"zebra"})});
    auto v = accumulate(idx, Bm25Params{}, qs, UtilityFunction{});
    CHECK(v.scores == std::vector<double>{0.0, 0.0});
    CHECK(v.meta.total_hits == 0);
}

TEST_CASE("accumulate refuses query sets from a different pipeline") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs, "fp-real");
    auto qs = make_qs(idx, {dq({"cat"})});

    SUBCASE("preprocessing fingerprint mismatch names both values") {
        qs.preprocess_fingerprint = "fp-other";
        try {
            accumulate(idx, Bm25Params{}, qs, UtilityFunction{});
            FAIL("expected DataError");
        } catch (const DataError& e) {
            std::string what = e.what();
            CHECK(what.find("fp-other") != std::string::npos);
            CHECK(what.find("fp-real") != std::string::npos);
        }
    }
    SUBCASE("corpus digest mismatch names both values") {
        std::string real = qs.corpus_digest;
        qs.corpus_digest = "0000000000000000";
        try {
            accumulate(idx, Bm25Params{}, qs, UtilityFunction{});
            FAIL("expected DataError");
        } catch (const DataError& e) {
            std::string what = e.what();
            CHECK(what.find("0000000000000000") != std::string::npos);
            CHECK(what.find(real) != std::string::npos);
        }
    }
}

TEST_CASE("accumulate validates its options") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    auto qs = make_qs(idx, {dq({"cat"})});
    AccumulateOptions opts;
    opts.workers = 0;
    CHECK_THROWS_AS(accumulate(idx, Bm25Params{}, qs, UtilityFunction{}, opts), ConfigError);
    opts.workers = 1;
    opts.resume = true;  // no checkpoint path
    CHECK_THROWS_AS(accumulate(idx, Bm25Params{}, qs, UtilityFunction{}, opts), ConfigError);
}

TEST_CASE("matches the full-ranking oracle on random corpora") {
    std::mt19937_64 rng(20240611);
    auto docs = random_docs(rng, 15, 10);
    auto idx = InvertedIndex::build(docs);
    Bm25Params params;
    auto qs = make_qs(idx, random_queries(rng, 80, 12));  // some terms out of vocabulary

    for (std::size_t c : {std::size_t{1}, std::size_t{3}, std::size_t{10}}) {
        CAPTURE(c);
        UtilityFunction cumulative{UtilityKind::cumulative, c};
        auto v = accumulate(idx, params, qs, cumulative);
        auto oracle = naive_accumulate(docs, params, qs, cumulative);
        check_matches_oracle_exactly(v, oracle);
        CHECK(v.meta.total_hits == oracle.hits);

        UtilityFunction gravity{UtilityKind::gravity, c, 2.0};
        check_matches_oracle_closely(accumulate(idx, params, qs, gravity),
                                     naive_accumulate(docs, params, qs, gravity));
    }
}

TEST_CASE("mass is conserved exactly for cumulative utility") {
    std::mt19937_64 rng(20240612);
    auto docs = random_docs(rng, 20, 8);
    auto idx = InvertedIndex::build(docs);
    Bm25Params params;

    SUBCASE("unit weights: total mass equals total hits") {
        auto qs = make_qs(idx, random_queries(rng, 100, 9));
        auto v = accumulate(idx, params, qs, UtilityFunction{UtilityKind::cumulative, 5});
        double mass = std::accumulate(v.scores.begin(), v.scores.end(), 0.0);
        CHECK(mass == static_cast<double>(v.meta.total_hits));
    }
    SUBCASE("integer weights: total mass equals the weighted entry count") {
        auto queries = random_queries(rng, 60, 9);
        for (std::size_t i = 0; i < queries.size(); i++)
            queries[i].weight = static_cast<double>(1 + i % 3);
        auto qs = make_qs(idx, queries);
        UtilityFunction u{UtilityKind::cumulative, 4};
        auto v = accumulate(idx, params, qs, u);
        auto oracle = naive_accumulate(docs, params, qs, u);
        double mass = std::accumulate(v.scores.begin(), v.scores.end(), 0.0);
        CHECK(mass == oracle.weighted_mass);
    }
}

TEST_CASE("result is invariant under query permutation") {
    std::mt19937_64 rng(20240613);
    auto docs = random_docs(rng, 25, 10);
    auto idx = InvertedIndex::build(docs);
    auto queries = random_queries(rng, 60, 10);
    auto base = accumulate(idx, Bm25Params{}, make_qs(idx, queries),
                           UtilityFunction{UtilityKind::cumulative, 5});

    std::shuffle(queries.begin(), queries.end(), rng);
    auto shuffled = accumulate(idx, Bm25Params{}, make_qs(idx, queries),
                               UtilityFunction{UtilityKind::cumulative, 5});
    CHECK(base.doc_ids == shuffled.doc_ids);
    CHECK(base.scores == shuffled.scores);
    CHECK(base.meta.total_hits == shuffled.meta.total_hits);
}

TEST_CASE("with cutoff >= N every matching document is retrieved at least once") {
    std::mt19937_64 rng(20240614);
    auto docs = random_docs(rng, 18, 6);
    auto idx = InvertedIndex::build(docs);
    std::vector<Query> queries;
    for (auto& q : random_queries(rng, 40, 7)) {
        q.mode = QueryMode::disjunctive;
        queries.push_back(std::move(q));
    }
    auto qs = make_qs(idx, queries);
    auto v = accumulate(idx, Bm25Params{}, qs, UtilityFunction{UtilityKind::cumulative, 18});

    for (std::size_t d = 0; d < docs.size(); d++) {
        bool matches_some_query = false;
        for (const auto& q : queries)
            for (const auto& t : q.terms)
                if (std::count(docs[d].terms.begin(), docs[d].terms.end(), t) > 0)
                    matches_some_query = true;
        auto it = std::find(v.doc_ids.begin(), v.doc_ids.end(), docs[d].doc_id);
        REQUIRE(it != v.doc_ids.end());
        double r = v.scores[static_cast<std::size_t>(it - v.doc_ids.begin())];
        if (matches_some_query)
            CHECK(r >= 1.0);
        else
            CHECK(r == 0.0);
    }
}

TEST_CASE("worker count and block size never change the result") {
    std::mt19937_64 rng(20240615);
    auto docs = random_docs(rng, 30, 10);
    auto idx = InvertedIndex::build(docs);
    auto qs = make_qs(idx, random_queries(rng, 60, 10));

    for (UtilityKind kind : {UtilityKind::cumulative, UtilityKind::gravity}) {
        CAPTURE(utility_kind_name(kind));
        UtilityFunction u{kind, 7, 2.0};
        auto base = accumulate(idx, Bm25Params{}, qs, u);

        testsupport::TempDir tmp;
        std::string base_path = tmp.file("base.csv");
        save_vector_csv(base, base_path);
        std::string base_bytes = testsupport::read_file(base_path);

        for (std::size_t workers : {std::size_t{2}, std::size_t{4}, std::size_t{8}}) {
            CAPTURE(workers);
            AccumulateOptions opts;
            opts.workers = workers;
            auto v = accumulate(idx, Bm25Params{}, qs, u, opts);
            CHECK(v.scores == base.scores);
            std::string path = tmp.file("w" + std::to_string(workers) + ".csv");
            save_vector_csv(v, path);
            CHECK(testsupport::read_file(path) == base_bytes);
        }
        for (std::size_t interval : {std::size_t{1}, std::size_t{3}, std::size_t{7}}) {
            CAPTURE(interval);
            AccumulateOptions opts;
            opts.workers = 3;
            opts.checkpoint_interval = interval;
            auto v = accumulate(idx, Bm25Params{}, qs, u, opts);
            CHECK(v.scores == base.scores);
        }
    }
}

TEST_CASE("merge sums vectors pointwise") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    auto qs_a = make_qs(idx, {dq({"cat"}), dq({"dog"})});
    auto qs_b = make_qs(idx, {dq({"mouse"})});
    UtilityFunction u{UtilityKind::cumulative, 2};
    auto a = accumulate(idx, Bm25Params{}, qs_a, u);
    auto b = accumulate(idx, Bm25Params{}, qs_b, u);

    SUBCASE("merging the zero vector is the identity") {
        auto zero = accumulate(idx, Bm25Params{}, make_qs(idx, {}), u);
        auto m = merge(a, zero);
        CHECK(m.doc_ids == a.doc_ids);
        CHECK(m.scores == a.scores);
        CHECK(m.meta.query_count == a.meta.query_count);
        CHECK(m.meta.total_hits == a.meta.total_hits);
    }
    SUBCASE("merge is commutative") {
        auto ab = merge(a, b);
        auto ba = merge(b, a);
        CHECK(ab.scores == ba.scores);
        CHECK(ab.meta.query_count == ba.meta.query_count);
    }
    SUBCASE("merged counts add up") {
        auto m = merge(a, b);
        CHECK(m.meta.query_count == 3);
        CHECK(m.meta.total_hits == a.meta.total_hits + b.meta.total_hits);
    }
    SUBCASE("different run configurations are rejected") {
        auto wider = accumulate(idx, Bm25Params{}, qs_b, UtilityFunction{UtilityKind::cumulative, 1});
        CHECK_THROWS_AS(merge(a, wider), DataError);
        auto other_params = accumulate(idx, Bm25Params{1.5, 0.75}, qs_b, u);
        CHECK_THROWS_AS(merge(a, other_params), DataError);
    }
    SUBCASE("different document sets are rejected") {
        auto mangled = b;
        mangled.doc_ids[0] += "x";
        CHECK_THROWS_AS(merge(a, mangled), DataError);
    }
}

TEST_CASE("sharded accumulation merges to the single-pass result") {
    std::mt19937_64 rng(20240616);
    auto docs = random_docs(rng, 20, 8);
    auto idx = InvertedIndex::build(docs);
    auto queries = random_queries(rng, 48, 8);
    auto full_qs = make_qs(idx, queries);
    UtilityFunction u{UtilityKind::cumulative, 6};
    auto single = accumulate(idx, Bm25Params{}, full_qs, u);

    for (std::size_t shards : {std::size_t{2}, std::size_t{4}, std::size_t{8}}) {
        CAPTURE(shards);
        std::vector<RetrievabilityVector> parts;
        std::size_t per = queries.size() / shards;
        for (std::size_t s = 0; s < shards; s++) {
            auto first = queries.begin() + static_cast<std::ptrdiff_t>(s * per);
            auto last = s + 1 == shards ? queries.end()
                                        : first + static_cast<std::ptrdiff_t>(per);
            parts.push_back(accumulate(idx, Bm25Params{},
                                       make_qs(idx, {first, last}), u));
        }
        RetrievabilityVector merged = parts[0];
        for (std::size_t s = 1; s < parts.size(); s++) merged = merge(merged, parts[s]);
        CHECK(merged.doc_ids == single.doc_ids);
        CHECK(merged.scores == single.scores);
        CHECK(merged.meta.query_count == single.meta.query_count);
        CHECK(merged.meta.total_hits == single.meta.total_hits);

        // association order does not matter either
        if (shards == 4) {
            auto left = merge(parts[0], parts[1]);
            auto right = merge(parts[2], parts[3]);
            CHECK(merge(left, right).scores == single.scores);
        }
    }
}

TEST_CASE("vector CSV round trips losslessly") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs, "fp-x");
    auto qs = make_qs(idx, {dq({"cat"}), dq({"dog"}, 0.5)}, "SQ1");
    UtilityFunction u{UtilityKind::gravity, 3, 2.5};
    auto v = accumulate(idx, Bm25Params{1.4, 0.6}, qs, u);

    testsupport::TempDir tmp;
    std::string path = tmp.file("vector.csv");
    save_vector_csv(v, path);

    std::string bytes = testsupport::read_file(path);
    CHECK(bytes.rfind("# retbias retrievability vector\n", 0) == 0);
    CHECK(bytes.find("# provenance: SQ1\n") != std::string::npos);
    CHECK(bytes.find("# utility: gravity\n") != std::string::npos);
    CHECK(bytes.find("# beta: 2.5\n") != std::string::npos);
    CHECK(bytes.find("doc_id,score\n") != std::string::npos);

    auto r = load_vector_csv(path);
    CHECK(r.doc_ids == v.doc_ids);
    CHECK(r.scores == v.scores);
    CHECK(r.meta.provenance == v.meta.provenance);
    CHECK(r.meta.queryset_fingerprint == v.meta.queryset_fingerprint);
    CHECK(r.meta.preprocess_fingerprint == v.meta.preprocess_fingerprint);
    CHECK(r.meta.corpus_digest == v.meta.corpus_digest);
    CHECK(r.meta.utility == v.meta.utility);
    CHECK(r.meta.c == v.meta.c);
    CHECK(r.meta.beta == v.meta.beta);
    CHECK(r.meta.k1 == v.meta.k1);
    CHECK(r.meta.b == v.meta.b);
    CHECK(r.meta.query_count == v.meta.query_count);
    CHECK(r.meta.total_hits == v.meta.total_hits);

    // a second save is byte-stable
    std::string again = tmp.file("again.csv");
    save_vector_csv(r, again);
    CHECK(testsupport::read_file(again) == bytes);
}

TEST_CASE("vector CSV handles awkward values") {
    RetrievabilityVector v;
    v.doc_ids = {"a,b", "aa", "zz"};
    v.scores = {1.0 / 3.0, 1e-300, 12345.678901234567};
    testsupport::TempDir tmp;
    std::string path = tmp.file("awkward.csv");
    save_vector_csv(v, path);
    auto r = load_vector_csv(path);
    CHECK(r.doc_ids == v.doc_ids);  // comma split happens at the last comma
    CHECK(r.scores == v.scores);

    RetrievabilityVector empty;
    std::string empty_path = tmp.file("empty.csv");
    save_vector_csv(empty, empty_path);
    auto re = load_vector_csv(empty_path);
    CHECK(re.doc_ids.empty());
    CHECK(re.scores.empty());
}

TEST_CASE("vector CSV loader rejects malformed input") {
    testsupport::TempDir tmp;
    CHECK_THROWS_AS(load_vector_csv(tmp.file("missing.csv")), DataError);

    auto write_and_load = [&](const std::string& name, const std::string& content) {
        std::string path = tmp.file(name);
        testsupport::write_file(path, content);
        return load_vector_csv(path);
    };
    CHECK_THROWS_AS(write_and_load("nocols.csv", "# provenance: X\n"), DataError);
    CHECK_THROWS_AS(write_and_load("badcols.csv", "doc,score\na,1\n"), DataError);
    CHECK_THROWS_AS(write_and_load("noscore.csv", "doc_id,score\njustadoc\n"), DataError);
    CHECK_THROWS_AS(write_and_load("badscore.csv", "doc_id,score\na,zero\n"), DataError);
    CHECK_THROWS_AS(write_and_load("order.csv", "doc_id,score\nb,1\na,2\n"), DataError);
    CHECK_THROWS_AS(write_and_load("dup.csv", "doc_id,score\na,1\na,2\n"), DataError);
    CHECK_THROWS_AS(
        write_and_load("badkind.csv", "# utility: parabolic\ndoc_id,score\na,1\n"), DataError);
    CHECK_THROWS_AS(write_and_load("badc.csv", "# c: ten\ndoc_id,score\na,1\n"), DataError);
}

TEST_CASE("interrupted runs resume from a checkpoint byte for byte") {
    std::mt19937_64 rng(20240617);
    auto docs = random_docs(rng, 16, 8);
    auto idx = InvertedIndex::build(docs);
    auto qs = make_qs(idx, random_queries(rng, 40, 8));
    UtilityFunction u{UtilityKind::cumulative, 5};
    Bm25Params params;
    testsupport::TempDir tmp;

    AccumulateOptions plain;
    plain.checkpoint_interval = 7;
    plain.workers = 2;
    auto full = accumulate(idx, params, qs, u, plain);

    AccumulateOptions stopping = plain;
    stopping.checkpoint_path = tmp.file("acc.ckpt");
    stopping.stop_after_blocks = 2;
    auto partial = accumulate(idx, params, qs, u, stopping);
    CHECK(partial.meta.query_count == 14);

    // the partial vector covers exactly the first two blocks
    QuerySet head = make_qs(idx, {qs.queries.begin(), qs.queries.begin() + 14});
    auto head_run = accumulate(idx, params, head, u, plain);
    CHECK(partial.scores == head_run.scores);
    CHECK(partial.meta.total_hits == head_run.meta.total_hits);

    AccumulateOptions resuming = plain;
    resuming.checkpoint_path = stopping.checkpoint_path;
    resuming.resume = true;
    auto resumed = accumulate(idx, params, qs, u, resuming);
    CHECK(resumed.doc_ids == full.doc_ids);
    CHECK(resumed.scores == full.scores);
    CHECK(resumed.meta.query_count == full.meta.query_count);
    CHECK(resumed.meta.total_hits == full.meta.total_hits);

    std::string full_path = tmp.file("full.csv");
    std::string resumed_path = tmp.file("resumed.csv");
    save_vector_csv(full, full_path);
    save_vector_csv(resumed, resumed_path);
    CHECK(testsupport::read_file(full_path) == testsupport::read_file(resumed_path));

    // resuming a finished run returns the full vector without rework
    auto again = accumulate(idx, params, qs, u, resuming);
    CHECK(again.scores == full.scores);
    CHECK(again.meta.query_count == full.meta.query_count);
}

TEST_CASE("resume rejects checkpoints from a different run") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    std::vector<Query> queries;
    for (int i = 0; i < 6; i++) queries.push_back(dq({"cat"}));
    auto qs = make_qs(idx, queries);
    testsupport::TempDir tmp;

    AccumulateOptions stopping;
    stopping.checkpoint_interval = 2;
    stopping.checkpoint_path = tmp.file("acc.ckpt");
    stopping.stop_after_blocks = 1;
    UtilityFunction u{UtilityKind::cumulative, 2};
    accumulate(idx, Bm25Params{}, qs, u, stopping);

    AccumulateOptions resuming = stopping;
    resuming.stop_after_blocks = 0;
    resuming.resume = true;

    SUBCASE("different cutoff") {
        CHECK_THROWS_AS(
            accumulate(idx, Bm25Params{}, qs, UtilityFunction{UtilityKind::cumulative, 3},
                       resuming),
            DataError);
    }
    SUBCASE("different block size") {
        resuming.checkpoint_interval = 3;
        CHECK_THROWS_AS(accumulate(idx, Bm25Params{}, qs, u, resuming), DataError);
    }
    SUBCASE("different bm25 parameters") {
        CHECK_THROWS_AS(accumulate(idx, Bm25Params{2.0, 0.75}, qs, u, resuming), DataError);
    }
    SUBCASE("different query set size") {
        auto longer = make_qs(idx, {qs.queries.begin(), qs.queries.end()});
        longer.queries.push_back(dq({"dog"}));
        CHECK_THROWS_AS(accumulate(idx, Bm25Params{}, longer, u, resuming), DataError);
    }
    SUBCASE("matching configuration still resumes") {
        auto v = accumulate(idx, Bm25Params{}, qs, u, resuming);
        CHECK(v.meta.query_count == 6);
    }
}

TEST_CASE("corrupt checkpoints are rejected") {
    auto docs = make_docs(kPets);
    auto idx = InvertedIndex::build(docs);
    std::vector<Query> queries;
    for (int i = 0; i < 4; i++) queries.push_back(dq({"dog"}));
    auto qs = make_qs(idx, queries);
    testsupport::TempDir tmp;
    std::string path = tmp.file("acc.ckpt");

    AccumulateOptions stopping;
    stopping.checkpoint_interval = 2;
    stopping.checkpoint_path = path;
    stopping.stop_after_blocks = 1;
    UtilityFunction u{UtilityKind::cumulative, 2};
    accumulate(idx, Bm25Params{}, qs, u, stopping);
    std::string good = testsupport::read_file(path);

    AccumulateOptions resuming = stopping;
    resuming.stop_after_blocks = 0;
    resuming.resume = true;
    auto expect_rejection = [&](const std::string& bytes, const std::string& needle) {
        testsupport::write_file(path, bytes);
        try {
            accumulate(idx, Bm25Params{}, qs, u, resuming);
            FAIL_CHECK("expected DataError for " << needle);
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    std::string flipped = good;
    flipped[good.size() / 2] = static_cast<char>(flipped[good.size() / 2] ^ 0x01);
    expect_rejection(flipped, "digest mismatch");
    expect_rejection(good.substr(0, 10), "truncated");
    std::string wrong_magic = good;
    wrong_magic[0] = 'X';
    expect_rejection(wrong_magic, "not a checkpoint");
    std::string with_tail = good + "x";
    expect_rejection(with_tail, "digest mismatch");
}
