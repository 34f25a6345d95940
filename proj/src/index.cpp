#include "retbias/index.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"

namespace retbias {

namespace fs = std::filesystem;

void Bm25Params::validate() const {
    if (!(k1 > 0.0)) throw ConfigError("bm25.k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("bm25.b must be in [0,1]");
}

QueryMode parse_query_mode(std::string_view name) {
    if (name == "disjunctive" || name == "d") return QueryMode::disjunctive;
    if (name == "conjunctive" || name == "c") return QueryMode::conjunctive;
    throw ConfigError("unknown query mode: " + std::string(name));
}

char query_mode_code(QueryMode mode) {
    return mode == QueryMode::disjunctive ? 'd' : 'c';
}

InvertedIndex InvertedIndex::build(const std::vector<Document>& docs,
                                   const std::string& preprocess_fingerprint) {
    InvertedIndex idx;
    idx.preprocess_fp_ = preprocess_fingerprint;
    idx.corpus_digest_ = retbias::corpus_digest(docs);

    std::unordered_set<std::string> seen;
    std::uint64_t total_len = 0;
    for (const auto& d : docs) {
        if (!seen.insert(d.doc_id).second)
            throw DataError("duplicate doc id in index build: " + d.doc_id);
        idx.doc_ids_.push_back(d.doc_id);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(d.terms.size()));
        total_len += d.terms.size();
        for (const auto& t : d.terms) idx.lexicon_.emplace(t, 0);
    }
    std::uint32_t tid = 0;
    for (auto& [term, id] : idx.lexicon_) id = tid++;
    idx.stats_.resize(idx.lexicon_.size());
    idx.postings_.resize(idx.lexicon_.size());

    std::unordered_map<std::uint32_t, std::uint32_t> tf_acc;
    for (std::uint32_t doc = 0; doc < docs.size(); doc++) {
        tf_acc.clear();
        for (const auto& t : docs[doc].terms) tf_acc[idx.lexicon_.find(t)->second]++;
        for (const auto& [t, tf] : tf_acc) {
            idx.stats_[t].cf += tf;
            idx.stats_[t].df += 1;
        }
        // postings appended in doc order keeps lists sorted by internal id
        std::vector<std::uint32_t> tids;
        tids.reserve(tf_acc.size());
        for (const auto& [t, tf] : tf_acc) tids.push_back(t);
        std::sort(tids.begin(), tids.end());
        for (std::uint32_t t : tids) idx.postings_[t].push_back({doc, tf_acc[t]});
    }
    idx.avgdl_ = docs.empty() ? 0.0
                              : static_cast<double>(total_len) / static_cast<double>(docs.size());
    return idx;
}

const std::string& InvertedIndex::doc_id(std::uint32_t internal) const {
    if (internal >= doc_ids_.size()) throw DataError("unknown internal doc id");
    return doc_ids_[internal];
}

std::uint32_t InvertedIndex::doc_length(std::uint32_t internal) const {
    if (internal >= doc_lengths_.size()) throw DataError("unknown internal doc id");
    return doc_lengths_[internal];
}

std::optional<std::uint32_t> InvertedIndex::internal_id(std::string_view doc_id) const {
    // linear scan; only used by tests and error paths
    for (std::uint32_t i = 0; i < doc_ids_.size(); i++)
        if (doc_ids_[i] == doc_id) return i;
    return std::nullopt;
}

std::optional<std::uint32_t> InvertedIndex::term_id(std::string_view term) const {
    auto it = lexicon_.find(term);
    if (it == lexicon_.end()) return std::nullopt;
    return it->second;
}

double InvertedIndex::idf(std::uint32_t tid) const {
    double n = static_cast<double>(n_docs());
    double df = static_cast<double>(stats_[tid].df);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

namespace {

// Shared by bm25_score, retrieve and the test oracles: the formula must be
// evaluated with this exact expression shape so scores compare bit-identically.
inline double bm25_term_contribution(double idf, double tf, double k1, double b, double dl,
                                     double avgdl) {
    double norm = k1 * (1.0 - b + b * (dl / avgdl));
    return idf * (tf * (k1 + 1.0)) / (tf + norm);
}

}  // namespace

double InvertedIndex::bm25_score(const Bm25Params& params, const std::vector<std::string>& terms,
                                 std::uint32_t internal_doc) const {
    if (internal_doc >= doc_ids_.size()) throw DataError("unknown internal doc id");
    params.validate();
    double score = 0.0;
    for (const auto& term : terms) {
        auto tid = term_id(term);
        if (!tid) continue;
        const auto& list = postings_[*tid];
        auto it = std::lower_bound(list.begin(), list.end(), internal_doc,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == list.end() || it->doc != internal_doc) continue;
        score += bm25_term_contribution(idf(*tid), static_cast<double>(it->tf), params.k1,
                                        params.b, static_cast<double>(doc_length(internal_doc)),
                                        avgdl_);
    }
    return score;
}

RankedList InvertedIndex::retrieve(const Bm25Params& params, const std::vector<std::string>& terms,
                                   std::size_t cutoff, QueryMode mode) const {
    params.validate();
    if (cutoff < 1) throw ConfigError("rank cutoff must be >= 1");
    if (terms.empty()) throw ConfigError("empty query");

    RankedList result;
    result.cutoff = cutoff;

    // distinct terms, for conjunctive hit counting and single idf application
    std::vector<std::string_view> distinct;
    std::vector<bool> is_first(terms.size(), false);
    for (std::size_t i = 0; i < terms.size(); i++) {
        if (std::find(distinct.begin(), distinct.end(), terms[i]) == distinct.end()) {
            distinct.push_back(terms[i]);
            is_first[i] = true;
        }
    }
    if (mode == QueryMode::conjunctive) {
        for (auto t : distinct)
            if (!has_term(t)) return result;  // AND with an unindexed term matches nothing
    }

    std::vector<double> scores(n_docs(), 0.0);
    std::vector<std::uint32_t> hits(n_docs(), 0);
    for (std::size_t i = 0; i < terms.size(); i++) {
        auto tid = term_id(terms[i]);
        if (!tid) continue;
        double tidf = idf(*tid);
        for (const Posting& p : postings_[*tid]) {
            scores[p.doc] += bm25_term_contribution(tidf, static_cast<double>(p.tf), params.k1,
                                                    params.b,
                                                    static_cast<double>(doc_lengths_[p.doc]),
                                                    avgdl_);
            if (is_first[i]) hits[p.doc]++;
        }
    }

    std::uint32_t required =
        mode == QueryMode::conjunctive ? static_cast<std::uint32_t>(distinct.size()) : 1;
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t d = 0; d < n_docs(); d++)
        if (hits[d] >= required) candidates.push_back(d);

    std::sort(candidates.begin(), candidates.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return doc_ids_[a] < doc_ids_[b];
    });
    if (candidates.size() > cutoff) candidates.resize(cutoff);
    result.entries.reserve(candidates.size());
    for (std::uint32_t d : candidates) result.entries.push_back({doc_ids_[d], scores[d]});
    return result;
}

void append_varint(std::string& out, std::uint64_t value) {
    while (value >= 0x80) {
        out.push_back(static_cast<char>((value & 0x7f) | 0x80));
        value >>= 7;
    }
    out.push_back(static_cast<char>(value));
}

std::uint64_t read_varint(std::string_view bytes, std::size_t& pos) {
    std::uint64_t value = 0;
    int shift = 0;
    while (true) {
        if (pos >= bytes.size()) throw DataError("truncated varint");
        if (shift >= 64) throw DataError("varint overflow");
        unsigned char byte = static_cast<unsigned char>(bytes[pos++]);
        value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
        if (!(byte & 0x80)) return value;
        shift += 7;
    }
}

namespace {

constexpr int kSnapshotVersion = 1;

}  // namespace

void InvertedIndex::save(const std::string& dir) const {
    fs::create_directories(dir);
    fs::path base(dir);

    std::string lex;
    for (const auto& [term, tid] : lexicon_) {
        lex += term;
        lex += '\t';
        lex += std::to_string(stats_[tid].cf);
        lex += '\t';
        lex += std::to_string(stats_[tid].df);
        lex += '\n';
    }
    write_file_atomic((base / "lexicon.tsv").string(), lex);

    std::string post;
    for (const auto& [term, tid] : lexicon_) {
        const auto& list = postings_[tid];
        append_varint(post, list.size());
        std::uint32_t prev = 0;
        bool first = true;
        for (const Posting& p : list) {
            append_varint(post, first ? p.doc : p.doc - prev);
            append_varint(post, p.tf);
            prev = p.doc;
            first = false;
        }
    }
    write_file_atomic((base / "postings.bin").string(), post);

    std::string docs;
    for (std::size_t i = 0; i < doc_ids_.size(); i++) {
        docs += doc_ids_[i];
        docs += '\t';
        docs += std::to_string(doc_lengths_[i]);
        docs += '\n';
    }
    write_file_atomic((base / "docs.tsv").string(), docs);

    nlohmann::json meta;
    meta["format_version"] = kSnapshotVersion;
    meta["n_docs"] = doc_ids_.size();
    meta["vocab_size"] = stats_.size();
    meta["avgdl"] = format_double(avgdl_);
    meta["preprocess_fingerprint"] = preprocess_fp_;
    meta["corpus_digest"] = corpus_digest_;
    write_file_atomic((base / "meta.json").string(), meta.dump(2) + "\n");
}

InvertedIndex InvertedIndex::load(const std::string& dir) {
    fs::path base(dir);
    InvertedIndex idx;

    nlohmann::json meta = nlohmann::json::parse(
        read_file_bytes((base / "meta.json").string()), nullptr, false);
    if (meta.is_discarded()) throw DataError("malformed meta.json in " + dir);
    if (meta.value("format_version", -1) != kSnapshotVersion)
        throw DataError("unsupported index snapshot version in " + dir);
    idx.preprocess_fp_ = meta.value("preprocess_fingerprint", "");
    idx.corpus_digest_ = meta.value("corpus_digest", "");

    std::string docs = read_file_bytes((base / "docs.tsv").string());
    std::uint64_t total_len = 0;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < docs.size()) {
        std::size_t nl = docs.find('\n', pos);
        if (nl == std::string::npos) throw DataError("docs.tsv: missing trailing newline");
        line_no++;
        std::string_view line(docs.data() + pos, nl - pos);
        std::size_t tab = line.rfind('\t');
        if (tab == std::string_view::npos)
            throw DataError("docs.tsv:" + std::to_string(line_no) + ": expected doc_id<TAB>length");
        idx.doc_ids_.emplace_back(line.substr(0, tab));
        std::uint32_t len = 0;
        auto ls = line.substr(tab + 1);
        auto [p, ec] = std::from_chars(ls.data(), ls.data() + ls.size(), len);
        if (ec != std::errc() || p != ls.data() + ls.size())
            throw DataError("docs.tsv:" + std::to_string(line_no) + ": bad length");
        idx.doc_lengths_.push_back(len);
        total_len += len;
        pos = nl + 1;
    }
    idx.avgdl_ = idx.doc_ids_.empty() ? 0.0
                                      : static_cast<double>(total_len) /
                                            static_cast<double>(idx.doc_ids_.size());

    std::string lex = read_file_bytes((base / "lexicon.tsv").string());
    pos = 0;
    line_no = 0;
    std::uint32_t tid = 0;
    while (pos < lex.size()) {
        std::size_t nl = lex.find('\n', pos);
        if (nl == std::string::npos) throw DataError("lexicon.tsv: missing trailing newline");
        line_no++;
        std::string_view line(lex.data() + pos, nl - pos);
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos)
            throw DataError("lexicon.tsv:" + std::to_string(line_no) + ": expected 3 columns");
        TermStats st;
        auto cfs = line.substr(t1 + 1, t2 - t1 - 1);
        auto dfs = line.substr(t2 + 1);
        auto [p1, e1] = std::from_chars(cfs.data(), cfs.data() + cfs.size(), st.cf);
        auto [p2, e2] = std::from_chars(dfs.data(), dfs.data() + dfs.size(), st.df);
        if (e1 != std::errc() || e2 != std::errc() || p1 != cfs.data() + cfs.size() ||
            p2 != dfs.data() + dfs.size())
            throw DataError("lexicon.tsv:" + std::to_string(line_no) + ": bad counts");
        idx.lexicon_.emplace(std::string(line.substr(0, t1)), tid++);
        idx.stats_.push_back(st);
        pos = nl + 1;
    }

    std::string post = read_file_bytes((base / "postings.bin").string());
    idx.postings_.resize(idx.stats_.size());
    pos = 0;
    for (std::uint32_t t = 0; t < idx.stats_.size(); t++) {
        std::uint64_t n = read_varint(post, pos);
        auto& list = idx.postings_[t];
        list.reserve(n);
        std::uint32_t doc = 0;
        for (std::uint64_t i = 0; i < n; i++) {
            std::uint64_t gap = read_varint(post, pos);
            std::uint64_t tf = read_varint(post, pos);
            doc = i == 0 ? static_cast<std::uint32_t>(gap)
                         : doc + static_cast<std::uint32_t>(gap);
            if (doc >= idx.doc_ids_.size())
                throw DataError("postings.bin: doc id out of range");
            list.push_back({doc, static_cast<std::uint32_t>(tf)});
        }
    }
    if (pos != post.size()) throw DataError("postings.bin: trailing bytes");

    if (meta.value("n_docs", std::size_t(0)) != idx.doc_ids_.size())
        throw DataError("meta.json n_docs does not match docs.tsv");
    if (meta.value("vocab_size", std::size_t(0)) != idx.stats_.size())
        throw DataError("meta.json vocab_size does not match lexicon.tsv");
    return idx;
}

}  // namespace retbias
