#include "retbias/corpus.hpp"

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"

namespace retbias {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "trec_text") return CorpusFormat::trec_text;
    throw ConfigError("unknown corpus format: " + std::string(name));
}

Document preprocess(const RawDocument& raw, const PreprocessConfig& cfg) {
    Document doc;
    doc.doc_id = raw.doc_id;
    doc.terms = preprocess_text(raw.text, cfg);
    doc.length = doc.terms.size();
    return doc;
}

RawCorpusReader::RawCorpusReader(const std::string& path, CorpusFormat format)
    : path_(path), format_(format), in_(path) {
    if (!in_) throw DataError("cannot open corpus file: " + path);
}

void RawCorpusReader::fail(std::size_t line, const std::string& what) const {
    throw DataError(path_ + ":" + std::to_string(line) + ": " + what);
}

void RawCorpusReader::check_unique(const std::string& doc_id, std::size_t line) {
    if (doc_id.empty()) fail(line, "empty doc id");
    if (doc_id.find_first_of("\t\n\r") != std::string::npos)
        fail(line, "doc id contains tab or newline: " + doc_id);
    if (!seen_ids_.insert(doc_id).second) fail(line, "duplicate doc id: " + doc_id);
}

std::optional<RawDocument> RawCorpusReader::next() {
    return format_ == CorpusFormat::jsonl ? next_jsonl() : next_trec();
}

std::optional<RawDocument> RawCorpusReader::next_jsonl() {
    std::string line;
    while (std::getline(in_, line)) {
        line_++;
        if (trim(line).empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) fail(line_, "malformed JSON");
        if (!rec.is_object()) fail(line_, "expected a JSON object");
        if (!rec.contains("id") || !rec["id"].is_string()) fail(line_, "missing string field \"id\"");
        if (!rec.contains("text") || !rec["text"].is_string())
            fail(line_, "missing string field \"text\"");
        RawDocument doc{rec["id"].get<std::string>(), rec["text"].get<std::string>()};
        check_unique(doc.doc_id, line_);
        // nlohmann validates UTF-8 during parse; re-check for defense in depth
        if (find_invalid_utf8(doc.text) != std::string_view::npos)
            fail(line_, "invalid UTF-8 in text");
        return doc;
    }
    return std::nullopt;
}

std::optional<RawDocument> RawCorpusReader::next_trec() {
    std::string line;
    bool found_open = false;
    while (std::getline(in_, line)) {
        line_++;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t != "<DOC>") fail(line_, "expected <DOC>, got: " + t);
        found_open = true;
        break;
    }
    if (!found_open) return std::nullopt;

    std::size_t doc_line = line_;
    RawDocument doc;
    bool have_id = false;
    bool in_text = false;
    bool text_started = false;
    std::string text;
    // lines inside <TEXT> are joined with single newlines, no trailing one
    auto append_segment = [&](std::string_view seg) {
        if (text_started) text += '\n';
        text.append(seg);
        text_started = true;
    };
    while (std::getline(in_, line)) {
        line_++;
        std::string t = trim(line);
        if (in_text) {
            std::size_t close = line.find("</TEXT>");
            if (close != std::string::npos) {
                if (close > 0) append_segment(std::string_view(line).substr(0, close));
                in_text = false;
            } else {
                append_segment(line);
            }
            continue;
        }
        if (t == "</DOC>") {
            if (!have_id) fail(doc_line, "document without <DOCNO>");
            check_unique(doc.doc_id, doc_line);
            if (find_invalid_utf8(text) != std::string_view::npos)
                fail(doc_line, "invalid UTF-8 in text");
            if (find_invalid_utf8(doc.doc_id) != std::string_view::npos)
                fail(doc_line, "invalid UTF-8 in doc id");
            doc.text = std::move(text);
            return doc;
        }
        if (t.rfind("<DOCNO>", 0) == 0) {
            std::size_t close = t.find("</DOCNO>");
            if (close == std::string::npos) fail(line_, "unterminated <DOCNO>");
            doc.doc_id = trim(std::string_view(t).substr(7, close - 7));
            have_id = true;
            continue;
        }
        std::size_t open = line.find("<TEXT>");
        if (open != std::string::npos) {
            std::size_t close = line.find("</TEXT>", open);
            if (close != std::string::npos) {
                if (close > open + 6)
                    append_segment(std::string_view(line).substr(open + 6, close - open - 6));
            } else {
                std::string rest = line.substr(open + 6);
                if (!trim(rest).empty()) append_segment(rest);
                in_text = true;
            }
            continue;
        }
        // tags we do not extract (e.g. <HEAD>) are skipped
    }
    fail(doc_line, "unterminated <DOC> block");
}

std::vector<Document> load_corpus(const std::string& path, CorpusFormat format,
                                  const PreprocessConfig& cfg) {
    RawCorpusReader reader(path, format);
    std::vector<Document> docs;
    while (auto raw = reader.next()) docs.push_back(preprocess(*raw, cfg));
    return docs;
}

std::string corpus_digest(const std::vector<Document>& docs) {
    Fnv1a h;
    for (const auto& d : docs) {
        h.update(d.doc_id);
        h.update_byte(1);
        for (const auto& t : d.terms) {
            h.update(t);
            h.update_byte(0);
        }
        h.update_byte(2);
    }
    return h.hex();
}

}  // namespace retbias
