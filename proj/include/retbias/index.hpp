#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retbias/corpus.hpp"

namespace retbias {

struct TermStats {
    std::uint64_t cf = 0;  // total occurrences in the collection
    std::uint32_t df = 0;  // number of documents containing the term
};

struct Posting {
    std::uint32_t doc = 0;  // internal id, ascending within a postings list
    std::uint32_t tf = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    /// k1 > 0 and 0 <= b <= 1, else ConfigError.
    void validate() const;
};

enum class QueryMode { disjunctive, conjunctive };

/// Accepts "disjunctive"/"conjunctive" and the file-format codes "d"/"c".
QueryMode parse_query_mode(std::string_view name);
char query_mode_code(QueryMode mode);

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;
};

/// Top-c result, score descending, ties broken by doc_id ascending.
struct RankedList {
    std::vector<RankedEntry> entries;
    std::size_t cutoff = 0;
};

/// Immutable in-memory inverted index. Term ids are assigned in
/// lexicographic term order, so save/load round-trips preserve them.
class InvertedIndex {
  public:
    static InvertedIndex build(const std::vector<Document>& docs,
                               const std::string& preprocess_fingerprint = "");

    std::size_t n_docs() const { return doc_ids_.size(); }
    double avgdl() const { return avgdl_; }
    std::size_t vocab_size() const { return stats_.size(); }
    const std::string& doc_id(std::uint32_t internal) const;
    std::uint32_t doc_length(std::uint32_t internal) const;
    std::optional<std::uint32_t> internal_id(std::string_view doc_id) const;

    bool has_term(std::string_view term) const { return lexicon_.count(term) != 0; }
    std::optional<std::uint32_t> term_id(std::string_view term) const;
    const TermStats& stats(std::uint32_t tid) const { return stats_[tid]; }
    const std::vector<Posting>& postings(std::uint32_t tid) const { return postings_[tid]; }
    /// term -> tid, iterates in lexicographic order.
    const std::map<std::string, std::uint32_t, std::less<>>& lexicon() const { return lexicon_; }

    double idf(std::uint32_t tid) const;

    /// Sum over the term multiset; terms absent from the doc contribute 0.
    double bm25_score(const Bm25Params& params, const std::vector<std::string>& terms,
                      std::uint32_t internal_doc) const;

    RankedList retrieve(const Bm25Params& params, const std::vector<std::string>& terms,
                        std::size_t cutoff, QueryMode mode) const;

    /// Snapshot directory: lexicon.tsv, postings.bin, docs.tsv, meta.json.
    void save(const std::string& dir) const;
    static InvertedIndex load(const std::string& dir);

    const std::string& preprocess_fingerprint() const { return preprocess_fp_; }
    const std::string& corpus_digest() const { return corpus_digest_; }

  private:
    std::map<std::string, std::uint32_t, std::less<>> lexicon_;
    std::vector<TermStats> stats_;                // indexed by tid
    std::vector<std::vector<Posting>> postings_;  // indexed by tid
    std::vector<std::string> doc_ids_;            // indexed by internal id (ingest order)
    std::vector<std::uint32_t> doc_lengths_;
    double avgdl_ = 0.0;
    std::string preprocess_fp_;
    std::string corpus_digest_;
};

/// LEB128 helpers shared by postings and checkpoint files.
void append_varint(std::string& out, std::uint64_t value);
std::uint64_t read_varint(std::string_view bytes, std::size_t& pos);

}  // namespace retbias
