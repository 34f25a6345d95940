#include "retbias/queryset.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "retbias/common.hpp"

namespace retbias {

namespace {

void validate_query(const Query& q, const std::string& context) {
    if (q.terms.empty() || q.terms.size() > 4)
        throw DataError(context + ": query must have 1..4 terms");
    if (!(q.weight >= 0.0)) throw DataError(context + ": negative weight");
    for (const auto& t : q.terms)
        if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos)
            throw DataError(context + ": malformed term");
}

}  // namespace

void save_queryset(const QuerySet& qs, const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write query set: " + path);
        out << "# retbias query set\n";
        out << "# provenance: " << qs.provenance << "\n";
        out << "# config_fingerprint: " << qs.config_fingerprint << "\n";
        out << "# preprocess_fingerprint: " << qs.preprocess_fingerprint << "\n";
        out << "# corpus_digest: " << qs.corpus_digest << "\n";
        out << "qid\tmode\tweight\tterms\n";
        std::size_t qid = 0;
        for (const auto& q : qs.queries) {
            qid++;
            validate_query(q, path + ": q" + std::to_string(qid));
            out << 'q' << qid << '\t' << query_mode_code(q.mode) << '\t'
                << format_double(q.weight) << '\t';
            for (std::size_t i = 0; i < q.terms.size(); i++) {
                if (i) out << ' ';
                out << q.terms[i];
            }
            out << '\n';
        }
        if (!out) throw DataError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

std::string queryset_fingerprint(std::string_view method, std::string_view config_dump,
                                 std::string_view preprocess_fp, std::string_view corpus_digest) {
    Fnv1a h;
    h.update(method);
    h.update_byte(0);
    h.update(config_dump);
    h.update_byte(0);
    h.update(preprocess_fp);
    h.update_byte(0);
    h.update(corpus_digest);
    return h.hex();
}

QuerySet load_queryset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open query set: " + path);
    QuerySet qs;
    std::string line;
    std::size_t line_no = 0;
    bool saw_columns = false;
    auto fail = [&](const std::string& what) -> void {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    auto header_field = [&](std::string_view line_sv, std::string_view key) -> bool {
        std::string prefix = "# ";
        prefix += key;
        prefix += ": ";
        return line_sv.rfind(prefix, 0) == 0;
    };
    while (std::getline(in, line)) {
        line_no++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string_view sv(line);
            for (auto [key, dest] :
                 {std::pair<std::string_view, std::string*>{"provenance", &qs.provenance},
                  {"config_fingerprint", &qs.config_fingerprint},
                  {"preprocess_fingerprint", &qs.preprocess_fingerprint},
                  {"corpus_digest", &qs.corpus_digest}}) {
                if (header_field(sv, key)) *dest = std::string(sv.substr(4 + key.size()));
            }
            continue;
        }
        if (!saw_columns) {
            if (line != "qid\tmode\tweight\tterms") fail("expected column header row");
            saw_columns = true;
            continue;
        }
        std::string_view sv(line);
        std::size_t t1 = sv.find('\t');
        std::size_t t2 = t1 == std::string_view::npos ? t1 : sv.find('\t', t1 + 1);
        std::size_t t3 = t2 == std::string_view::npos ? t2 : sv.find('\t', t2 + 1);
        if (t3 == std::string_view::npos) fail("expected 4 tab-separated columns");
        Query q;
        std::string_view mode = sv.substr(t1 + 1, t2 - t1 - 1);
        if (mode.size() != 1) fail("mode must be d or c");
        q.mode = parse_query_mode(mode);
        std::string_view weight = sv.substr(t2 + 1, t3 - t2 - 1);
        auto [p, ec] = std::from_chars(weight.data(), weight.data() + weight.size(), q.weight);
        if (ec != std::errc() || p != weight.data() + weight.size()) fail("bad weight");
        std::string_view terms = sv.substr(t3 + 1);
        std::size_t pos = 0;
        while (pos <= terms.size()) {
            std::size_t sp = terms.find(' ', pos);
            if (sp == std::string_view::npos) sp = terms.size();
            if (sp > pos) q.terms.emplace_back(terms.substr(pos, sp - pos));
            pos = sp + 1;
        }
        validate_query(q, path + ":" + std::to_string(line_no));
        qs.queries.push_back(std::move(q));
    }
    if (!saw_columns) throw DataError(path + ": missing column header row");
    return qs;
}

}  // namespace retbias
