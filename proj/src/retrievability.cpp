#include "retbias/retrievability.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <numeric>
#include <optional>
#include <thread>
#include <unordered_map>
#include <utility>

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"

namespace retbias {

static_assert(std::endian::native == std::endian::little,
              "checkpoint doubles are stored as raw little-endian bytes");

UtilityKind parse_utility_kind(std::string_view name) {
    if (name == "cumulative") return UtilityKind::cumulative;
    if (name == "gravity") return UtilityKind::gravity;
    throw ConfigError("unknown utility kind: " + std::string(name));
}

std::string_view utility_kind_name(UtilityKind kind) {
    return kind == UtilityKind::cumulative ? "cumulative" : "gravity";
}

void UtilityFunction::validate() const {
    if (c < 1) throw ConfigError("utility cutoff must be at least 1");
    if (kind == UtilityKind::gravity && !(beta > 0.0 && std::isfinite(beta)))
        throw ConfigError("gravity exponent must be positive and finite");
}

double UtilityFunction::operator()(std::size_t rank) const {
    if (rank == 0) throw Error("utility rank is 1-based");
    if (rank > c) return 0.0;
    if (kind == UtilityKind::cumulative) return 1.0;
    return 1.0 / std::pow(static_cast<double>(rank), beta);
}

bool VectorMeta::same_run_config(const VectorMeta& other) const {
    return provenance == other.provenance && queryset_fingerprint == other.queryset_fingerprint &&
           preprocess_fingerprint == other.preprocess_fingerprint &&
           corpus_digest == other.corpus_digest && utility == other.utility && c == other.c &&
           beta == other.beta && k1 == other.k1 && b == other.b;
}

namespace {

constexpr std::string_view kCheckpointMagic = "RBCKPT01";

void append_double_le(std::string& out, double value) {
    char buf[sizeof(double)];
    std::memcpy(buf, &value, sizeof buf);
    out.append(buf, sizeof buf);
}

double read_double_le(std::string_view bytes, std::size_t& pos) {
    if (pos + sizeof(double) > bytes.size()) throw DataError("truncated checkpoint");
    double value;
    std::memcpy(&value, bytes.data() + pos, sizeof value);
    pos += sizeof value;
    return value;
}

// Cumulative needs one weight sum per document; gravity keeps a per-rank
// weight histogram so the discount can be applied once at finalization in a
// fixed order.
std::size_t state_size(const UtilityFunction& u, std::size_t n_docs) {
    return u.kind == UtilityKind::gravity ? n_docs * u.c : n_docs;
}

struct Progress {
    std::size_t queries_done = 0;
    std::uint64_t total_hits = 0;
    std::vector<double> state;
};

nlohmann::json checkpoint_header(const VectorMeta& meta, std::size_t n_docs,
                                 std::size_t checkpoint_interval, std::size_t total_queries) {
    return nlohmann::json{
        {"provenance", meta.provenance},
        {"queryset_fingerprint", meta.queryset_fingerprint},
        {"preprocess_fingerprint", meta.preprocess_fingerprint},
        {"corpus_digest", meta.corpus_digest},
        {"utility", utility_kind_name(meta.utility)},
        {"c", meta.c},
        {"beta", format_double(meta.beta)},
        {"k1", format_double(meta.k1)},
        {"b", format_double(meta.b)},
        {"n_docs", n_docs},
        {"checkpoint_interval", checkpoint_interval},
        {"total_queries", total_queries},
    };
}

void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      const Progress& prog) {
    nlohmann::json j = header;
    j["queries_done"] = prog.queries_done;
    j["total_hits"] = prog.total_hits;
    std::string payload = j.dump();

    std::string out(kCheckpointMagic);
    append_varint(out, payload.size());
    out += payload;
    append_varint(out, prog.state.size());
    for (double v : prog.state) append_double_le(out, v);
    Fnv1a digest;
    digest.update(out);
    std::uint64_t d = digest.value();
    for (int i = 0; i < 8; i++) out.push_back(static_cast<char>((d >> (8 * i)) & 0xff));
    write_file_atomic(path, out);
}

Progress load_checkpoint(const std::string& path, const nlohmann::json& expected_header,
                         std::size_t expected_state_size) {
    std::string bytes = read_file_bytes(path);
    if (bytes.size() < kCheckpointMagic.size() + 8) throw DataError("truncated checkpoint: " + path);
    if (std::string_view(bytes).substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
        throw DataError("not a checkpoint file: " + path);

    Fnv1a digest;
    digest.update(std::string_view(bytes).substr(0, bytes.size() - 8));
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; i++)
        stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[bytes.size() - 8 + i]))
                  << (8 * i);
    if (digest.value() != stored) throw DataError("checkpoint digest mismatch: " + path);

    std::string_view body(bytes.data(), bytes.size() - 8);
    std::size_t pos = kCheckpointMagic.size();
    std::uint64_t header_len = read_varint(body, pos);
    if (pos + header_len > body.size()) throw DataError("truncated checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(body.substr(pos, header_len), nullptr, false);
    if (j.is_discarded()) throw DataError("malformed checkpoint metadata: " + path);
    pos += header_len;

    for (const auto& [key, want] : expected_header.items()) {
        if (!j.contains(key) || j.at(key) != want)
            throw DataError("checkpoint " + key + " does not match this run: " + path);
    }
    std::uint64_t done = j.value("queries_done", std::uint64_t{0});
    std::uint64_t total = expected_header.at("total_queries").get<std::uint64_t>();
    if (done > total) throw DataError("checkpoint is ahead of the query set: " + path);

    Progress prog;
    prog.queries_done = static_cast<std::size_t>(done);
    prog.total_hits = j.value("total_hits", std::uint64_t{0});
    std::uint64_t n = read_varint(body, pos);
    if (n != expected_state_size) throw DataError("checkpoint state size mismatch: " + path);
    prog.state.reserve(n);
    for (std::uint64_t i = 0; i < n; i++) prog.state.push_back(read_double_le(body, pos));
    if (pos != body.size()) throw DataError("trailing bytes in checkpoint: " + path);
    return prog;
}

}  // namespace

RetrievabilityVector accumulate(const InvertedIndex& idx, const Bm25Params& params,
                                const QuerySet& qs, const UtilityFunction& u,
                                const AccumulateOptions& opts) {
    params.validate();
    u.validate();
    if (opts.workers == 0) throw ConfigError("workers must be at least 1");
    if (opts.resume && opts.checkpoint_path.empty())
        throw ConfigError("resume requires a checkpoint path");
    if (qs.preprocess_fingerprint != idx.preprocess_fingerprint())
        throw DataError("query set preprocessing fingerprint " + qs.preprocess_fingerprint +
                        " does not match index fingerprint " + idx.preprocess_fingerprint());
    if (qs.corpus_digest != idx.corpus_digest())
        throw DataError("query set corpus digest " + qs.corpus_digest +
                        " does not match index corpus digest " + idx.corpus_digest());

    VectorMeta meta;
    meta.provenance = qs.provenance;
    meta.queryset_fingerprint = qs.config_fingerprint;
    meta.preprocess_fingerprint = qs.preprocess_fingerprint;
    meta.corpus_digest = qs.corpus_digest;
    meta.utility = u.kind;
    meta.c = u.c;
    meta.beta = u.beta;
    meta.k1 = params.k1;
    meta.b = params.b;

    const std::size_t n_docs = idx.n_docs();
    const std::size_t total = qs.queries.size();
    const std::size_t ssize = state_size(u, n_docs);
    const std::size_t interval = opts.checkpoint_interval == 0 ? total : opts.checkpoint_interval;
    const nlohmann::json header = checkpoint_header(meta, n_docs, opts.checkpoint_interval, total);

    std::unordered_map<std::string_view, std::uint32_t> internal;
    internal.reserve(n_docs);
    for (std::uint32_t d = 0; d < n_docs; d++)
        internal.emplace(idx.doc_id(d), d);

    Progress prog;
    if (opts.resume) {
        prog = load_checkpoint(opts.checkpoint_path, header, ssize);
    } else {
        prog.state.assign(ssize, 0.0);
    }

    const std::size_t workers = opts.workers;
    std::vector<std::vector<double>> shard_state(workers);
    std::vector<std::uint64_t> shard_hits(workers);
    std::vector<std::exception_ptr> shard_error(workers);
    std::size_t blocks_done = 0;

    while (prog.queries_done < total) {
        const std::size_t lo = prog.queries_done;
        const std::size_t hi = std::min(lo + interval, total);
        const std::size_t block = hi - lo;
        const std::size_t base = block / workers;
        const std::size_t rem = block % workers;
        for (auto& st : shard_state) st.assign(ssize, 0.0);
        std::fill(shard_hits.begin(), shard_hits.end(), 0);
        std::fill(shard_error.begin(), shard_error.end(), nullptr);

        auto run_shard = [&](std::size_t s) noexcept {
            try {
                const std::size_t start = lo + s * base + std::min(s, rem);
                const std::size_t len = base + (s < rem ? 1 : 0);
                auto& st = shard_state[s];
                std::uint64_t hits = 0;
                for (std::size_t qi = start; qi < start + len; qi++) {
                    const Query& q = qs.queries[qi];
                    RankedList rl = idx.retrieve(params, q.terms, u.c, q.mode);
                    hits += rl.entries.size();
                    for (std::size_t r = 0; r < rl.entries.size(); r++) {
                        auto it = internal.find(rl.entries[r].doc_id);
                        if (it == internal.end())
                            throw Error("internal: ranked result names an unknown document");
                        if (u.kind == UtilityKind::cumulative)
                            st[it->second] += q.weight;
                        else
                            st[static_cast<std::size_t>(it->second) * u.c + r] += q.weight;
                    }
                }
                shard_hits[s] = hits;
            } catch (...) {
                shard_error[s] = std::current_exception();
            }
        };

        if (workers == 1) {
            run_shard(0);
        } else {
            std::vector<std::thread> threads;
            threads.reserve(workers - 1);
            for (std::size_t s = 1; s < workers; s++) threads.emplace_back(run_shard, s);
            run_shard(0);
            for (auto& t : threads) t.join();
        }
        for (std::size_t s = 0; s < workers; s++)
            if (shard_error[s]) std::rethrow_exception(shard_error[s]);

        // Merge in shard order so the result does not depend on the worker
        // count (exactly so for integer query weights).
        for (std::size_t s = 0; s < workers; s++) {
            const auto& st = shard_state[s];
            for (std::size_t i = 0; i < ssize; i++) prog.state[i] += st[i];
            prog.total_hits += shard_hits[s];
        }
        prog.queries_done = hi;
        blocks_done++;
        if (!opts.checkpoint_path.empty()) write_checkpoint(opts.checkpoint_path, header, prog);
        if (opts.stop_after_blocks != 0 && blocks_done >= opts.stop_after_blocks) break;
    }

    meta.query_count = prog.queries_done;
    meta.total_hits = prog.total_hits;

    std::vector<std::uint32_t> order(n_docs);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return idx.doc_id(a) < idx.doc_id(b);
    });

    std::vector<double> utility_at_rank;
    if (u.kind == UtilityKind::gravity) {
        utility_at_rank.reserve(u.c);
        for (std::size_t k = 1; k <= u.c; k++) utility_at_rank.push_back(u(k));
    }

    RetrievabilityVector v;
    v.meta = std::move(meta);
    v.doc_ids.reserve(n_docs);
    v.scores.reserve(n_docs);
    for (std::uint32_t d : order) {
        v.doc_ids.push_back(idx.doc_id(d));
        if (u.kind == UtilityKind::cumulative) {
            v.scores.push_back(prog.state[d]);
        } else {
            double r = 0.0;
            const std::size_t off = static_cast<std::size_t>(d) * u.c;
            for (std::size_t k = 0; k < u.c; k++) r += prog.state[off + k] * utility_at_rank[k];
            v.scores.push_back(r);
        }
    }
    return v;
}

RetrievabilityVector merge(const RetrievabilityVector& a, const RetrievabilityVector& b) {
    if (a.doc_ids.size() != a.scores.size() || b.doc_ids.size() != b.scores.size())
        throw DataError("merge: malformed retrievability vector");
    if (!a.meta.same_run_config(b.meta))
        throw DataError("merge: vectors come from different run configurations");
    if (a.doc_ids != b.doc_ids) throw DataError("merge: vectors cover different documents");
    RetrievabilityVector out = a;
    for (std::size_t i = 0; i < out.scores.size(); i++) out.scores[i] += b.scores[i];
    out.meta.query_count += b.meta.query_count;
    out.meta.total_hits += b.meta.total_hits;
    return out;
}

void save_vector_csv(const RetrievabilityVector& v, const std::string& path) {
    if (v.doc_ids.size() != v.scores.size())
        throw DataError("malformed retrievability vector: " + path);
    std::string out;
    out += "# retbias retrievability vector\n";
    out += "# provenance: " + v.meta.provenance + "\n";
    out += "# queryset_fingerprint: " + v.meta.queryset_fingerprint + "\n";
    out += "# preprocess_fingerprint: " + v.meta.preprocess_fingerprint + "\n";
    out += "# corpus_digest: " + v.meta.corpus_digest + "\n";
    out += "# utility: " + std::string(utility_kind_name(v.meta.utility)) + "\n";
    out += "# c: " + std::to_string(v.meta.c) + "\n";
    out += "# beta: " + format_double(v.meta.beta) + "\n";
    out += "# k1: " + format_double(v.meta.k1) + "\n";
    out += "# b: " + format_double(v.meta.b) + "\n";
    out += "# query_count: " + std::to_string(v.meta.query_count) + "\n";
    out += "# total_hits: " + std::to_string(v.meta.total_hits) + "\n";
    out += "doc_id,score\n";
    for (std::size_t i = 0; i < v.doc_ids.size(); i++) {
        if (i > 0 && !(v.doc_ids[i - 1] < v.doc_ids[i]))
            throw DataError("retrievability vector doc ids out of order: " + path);
        out += v.doc_ids[i];
        out += ',';
        out += format_double(v.scores[i]);
        out += '\n';
    }
    write_file_atomic(path, out);
}

RetrievabilityVector load_vector_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open retrievability vector: " + path);
    RetrievabilityVector v;
    std::string line;
    std::size_t line_no = 0;
    bool saw_columns = false;
    auto fail = [&](const std::string& what) -> void {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    auto parse_u64 = [&](std::string_view text) -> std::uint64_t {
        std::uint64_t value = 0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || p != text.data() + text.size()) fail("bad integer field");
        return value;
    };
    auto parse_dbl = [&](std::string_view text) -> double {
        double value = 0.0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || p != text.data() + text.size()) fail("bad numeric field");
        return value;
    };
    while (std::getline(in, line)) {
        line_no++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string_view sv(line);
            auto value_of = [&](std::string_view key) -> std::optional<std::string_view> {
                std::string prefix = "# ";
                prefix += key;
                prefix += ": ";
                if (sv.rfind(prefix, 0) != 0) return std::nullopt;
                return sv.substr(prefix.size());
            };
            if (auto x = value_of("provenance")) v.meta.provenance = std::string(*x);
            if (auto x = value_of("queryset_fingerprint")) v.meta.queryset_fingerprint = std::string(*x);
            if (auto x = value_of("preprocess_fingerprint"))
                v.meta.preprocess_fingerprint = std::string(*x);
            if (auto x = value_of("corpus_digest")) v.meta.corpus_digest = std::string(*x);
            if (auto x = value_of("utility")) {
                try {
                    v.meta.utility = parse_utility_kind(*x);
                } catch (const ConfigError&) {
                    fail("unknown utility kind");
                }
            }
            if (auto x = value_of("c")) v.meta.c = static_cast<std::size_t>(parse_u64(*x));
            if (auto x = value_of("beta")) v.meta.beta = parse_dbl(*x);
            if (auto x = value_of("k1")) v.meta.k1 = parse_dbl(*x);
            if (auto x = value_of("b")) v.meta.b = parse_dbl(*x);
            if (auto x = value_of("query_count")) v.meta.query_count = parse_u64(*x);
            if (auto x = value_of("total_hits")) v.meta.total_hits = parse_u64(*x);
            continue;
        }
        if (!saw_columns) {
            if (line != "doc_id,score") fail("expected column header row doc_id,score");
            saw_columns = true;
            continue;
        }
        // Doc ids may contain commas; scores never do, so split at the last one.
        std::size_t comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0) fail("expected doc_id,score");
        std::string doc_id = line.substr(0, comma);
        double score = parse_dbl(std::string_view(line).substr(comma + 1));
        if (!v.doc_ids.empty() && !(v.doc_ids.back() < doc_id)) fail("doc ids out of order");
        v.doc_ids.push_back(std::move(doc_id));
        v.scores.push_back(score);
    }
    if (!saw_columns) throw DataError(path + ": missing column header row");
    return v;
}

}  // namespace retbias
