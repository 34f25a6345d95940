#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "retbias/text.hpp"

namespace retbias {

struct RawDocument {
    std::string doc_id;
    std::string text;
};

/// Preprocessed document: ordered stemmed terms.
struct Document {
    std::string doc_id;
    std::vector<std::string> terms;
    std::size_t length = 0;  // == terms.size(), maintained by preprocess()
};

enum class CorpusFormat { jsonl, trec_text };

/// Accepts "jsonl" or "trec_text".
CorpusFormat parse_corpus_format(std::string_view name);

Document preprocess(const RawDocument& raw, const PreprocessConfig& cfg);

/// Streams RawDocuments out of a corpus file in file order. Rejects
/// duplicate doc_ids and invalid UTF-8, reporting the offending line.
class RawCorpusReader {
  public:
    RawCorpusReader(const std::string& path, CorpusFormat format);

    /// Next document, or nullopt at end of file.
    std::optional<RawDocument> next();

  private:
    std::optional<RawDocument> next_jsonl();
    std::optional<RawDocument> next_trec();
    void check_unique(const std::string& doc_id, std::size_t line);
    [[noreturn]] void fail(std::size_t line, const std::string& what) const;

    std::string path_;
    CorpusFormat format_;
    std::ifstream in_;
    std::size_t line_ = 0;
    std::unordered_set<std::string> seen_ids_;
};

/// Reads and preprocesses a whole corpus file.
std::vector<Document> load_corpus(const std::string& path, CorpusFormat format,
                                  const PreprocessConfig& cfg);

/// FNV-1a over doc ids and preprocessed terms in ingest order. Identifies
/// the (corpus, preprocessing) pair an index or query set was derived from.
std::string corpus_digest(const std::vector<Document>& docs);

}  // namespace retbias
