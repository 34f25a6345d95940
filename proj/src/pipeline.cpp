#include "retbias/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "retbias/analysis.hpp"
#include "retbias/common.hpp"
#include "retbias/corpus.hpp"
#include "retbias/index.hpp"
#include "retbias/postag.hpp"
#include "retbias/querygen.hpp"
#include "retbias/queryset.hpp"
#include "retbias/retrievability.hpp"

namespace retbias {
namespace {

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string fixed_decimals(double v, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

std::string digest_file(const std::string& path) { return fnv1a_hex(read_file_bytes(path)); }

json output_entry(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    return json{{"bytes", bytes.size()}, {"digest", fnv1a_hex(bytes)}};
}

/// Manifest keys for files under the output directory are relative to it.
std::string rel_out(const ExperimentConfig& cfg, const std::string& path) {
    const std::string prefix = cfg.output_dir + "/";
    if (path.rfind(prefix, 0) == 0) return path.substr(prefix.size());
    return path;
}

struct Manifest {
    std::string path;
    json doc;
};

Manifest open_manifest(const ExperimentConfig& cfg, std::ostream& log) {
    Manifest m{manifest_path(cfg), json()};
    const std::string fp = cfg.fingerprint();
    if (std::filesystem::is_regular_file(m.path)) {
        try {
            json existing = json::parse(read_file_bytes(m.path));
            if (existing.value("config_fingerprint", "") == fp) {
                m.doc = std::move(existing);
                return m;
            }
            log << "note: config changed; starting a fresh manifest\n";
        } catch (const std::exception&) {
            log << "note: unreadable manifest at " << m.path << "; starting fresh\n";
        }
    }
    m.doc = json{{"config_fingerprint", fp},
                 {"stages", json::object()},
                 {"tool_version", kToolVersion}};
    return m;
}

/// Replaces the stage entry and persists the manifest. Timings live only in
/// "seconds"; everything else is deterministic.
void record_stage(Manifest& m, const std::string& stage, double seconds, json stats, json inputs,
                  json outputs) {
    m.doc["stages"][stage] = json{{"inputs", std::move(inputs)},
                                  {"outputs", std::move(outputs)},
                                  {"seconds", format_double(seconds)},
                                  {"stats", std::move(stats)}};
    write_file_atomic(m.path, m.doc.dump(2) + "\n");
}

std::vector<const QuerySetSpec*> select_specs(const ExperimentConfig& cfg,
                                              const std::vector<std::string>& names) {
    std::vector<const QuerySetSpec*> specs;
    if (names.empty()) {
        for (const auto& s : cfg.query_sets) specs.push_back(&s);
    } else {
        for (const auto& n : names) specs.push_back(&cfg.query_set(n));
    }
    return specs;
}

std::vector<Document> load_documents(const ExperimentConfig& cfg, const char* stage) {
    auto docs = load_corpus(cfg.corpus.path, cfg.corpus.format, cfg.preprocessing);
    if (docs.empty())
        throw DataError(std::string(stage) + ": corpus contains no documents: " + cfg.corpus.path);
    return docs;
}

constexpr const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2e8b57", "#e09f3e",
                                    "#6d597a", "#00798c", "#9e2a2b", "#4a7c59"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string render_lorenz_svg(const std::vector<std::pair<std::string, const LorenzCurve*>>& curves) {
    constexpr double kLeft = 64, kRight = 616, kTop = 48, kBottom = 428;
    auto px = [](double f) { return kLeft + f * (kRight - kLeft); };
    auto py = [](double f) { return kBottom - f * (kBottom - kTop); };
    auto num = [](double v) { return fixed_decimals(v, 2); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 480\" "
         "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n";
    s += "  <rect width=\"640\" height=\"480\" fill=\"#ffffff\"/>\n";
    s += "  <text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
         "Lorenz curves of retrievability</text>\n";

    for (int i = 0; i <= 4; i++) {
        const double f = i / 4.0;
        const std::string tick = fixed_decimals(f, 2);
        s += "  <line x1=\"" + num(px(f)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(f)) +
             "\" y2=\"" + num(py(1)) + "\" stroke=\"#dddddd\"/>\n";
        s += "  <line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(f)) + "\" x2=\"" + num(px(1)) +
             "\" y2=\"" + num(py(f)) + "\" stroke=\"#dddddd\"/>\n";
        s += "  <text x=\"" + num(px(f)) + "\" y=\"" + num(kBottom + 18) +
             "\" text-anchor=\"middle\">" + tick + "</text>\n";
        s += "  <text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(f) + 4) +
             "\" text-anchor=\"end\">" + tick + "</text>\n";
    }
    s += "  <rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" +
         num(kRight - kLeft) + "\" height=\"" + num(kBottom - kTop) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";
    s += "  <text x=\"320\" y=\"464\" text-anchor=\"middle\">"
         "share of documents (ascending retrievability)</text>\n";
    s += "  <text x=\"20\" y=\"238\" text-anchor=\"middle\" transform=\"rotate(-90 20 238)\">"
         "share of retrievability mass</text>\n";
    s += "  <line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(1)) +
         "\" y2=\"" + num(py(1)) + "\" stroke=\"#999999\" stroke-dasharray=\"5,4\"/>\n";

    for (std::size_t i = 0; i < curves.size(); i++) {
        std::string points;
        for (const auto& p : curves[i].second->points) {
            if (!points.empty()) points += ' ';
            points += num(px(p.pop_frac)) + "," + num(py(p.score_frac));
        }
        s += "  <polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
             kPalette[i % kPaletteSize] + "\" stroke-width=\"1.5\"/>\n";
    }
    for (std::size_t i = 0; i < curves.size(); i++) {
        const double y = kTop + 16 + 17.0 * static_cast<double>(i);
        s += "  <line x1=\"" + num(kLeft + 10) + "\" y1=\"" + num(y) + "\" x2=\"" +
             num(kLeft + 34) + "\" y2=\"" + num(y) + "\" stroke=\"" + kPalette[i % kPaletteSize] +
             "\" stroke-width=\"2.5\"/>\n";
        s += "  <text x=\"" + num(kLeft + 40) + "\" y=\"" + num(y + 4) + "\">" + curves[i].first +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace

std::string index_dir(const ExperimentConfig& cfg) { return cfg.output_dir + "/index"; }

std::string vector_path(const ExperimentConfig& cfg, const std::string& name) {
    return cfg.output_dir + "/vectors/" + name + ".csv";
}

std::string report_dir(const ExperimentConfig& cfg) { return cfg.output_dir + "/report"; }

std::string manifest_path(const ExperimentConfig& cfg) { return cfg.output_dir + "/manifest.json"; }

void cmd_index(const ExperimentConfig& cfg, std::ostream& log) {
    Timer timer;
    auto docs = load_documents(cfg, "index");
    auto idx = InvertedIndex::build(docs, cfg.preprocessing.fingerprint());
    const std::string dir = index_dir(cfg);
    idx.save(dir);
    const double secs = timer.seconds();

    json outputs;
    for (const char* f : {"docs.tsv", "lexicon.tsv", "meta.json", "postings.bin"}) {
        const std::string p = dir + "/" + f;
        outputs[rel_out(cfg, p)] = output_entry(p);
    }
    json inputs{{cfg.corpus.path, digest_file(cfg.corpus.path)}};
    if (!cfg.stopwords_path.empty()) inputs[cfg.stopwords_path] = digest_file(cfg.stopwords_path);

    auto m = open_manifest(cfg, log);
    record_stage(m, "index", secs,
                 json{{"avgdl", format_double(idx.avgdl())},
                      {"n_docs", idx.n_docs()},
                      {"vocab_size", idx.vocab_size()}},
                 std::move(inputs), std::move(outputs));
    log << "indexed " << idx.n_docs() << " documents, " << idx.vocab_size() << " terms, avgdl "
        << fixed_decimals(idx.avgdl(), 2) << " in " << fixed_decimals(secs, 2) << " s\n";
}

void cmd_gen_queries(const ExperimentConfig& cfg, const std::vector<std::string>& names,
                     std::ostream& log) {
    auto specs = select_specs(cfg, names);
    if (specs.empty()) {
        log << "no query sets configured\n";
        return;
    }

    bool need_index = false;
    bool need_raw = false;
    for (const auto* s : specs) (s->method == "rsq" ? need_raw : need_index) = true;

    std::vector<Document> docs;
    std::optional<InvertedIndex> idx;
    if (need_index) {
        docs = load_documents(cfg, "gen-queries");
        idx.emplace(InvertedIndex::build(docs, cfg.preprocessing.fingerprint()));
    }
    std::vector<RawDocument> raw;
    if (need_raw) {
        RawCorpusReader reader(cfg.corpus.path, cfg.corpus.format);
        while (auto d = reader.next()) raw.push_back(std::move(*d));
        if (raw.empty())
            throw DataError("gen-queries: corpus contains no documents: " + cfg.corpus.path);
    }

    auto m = open_manifest(cfg, log);
    for (const auto* spec : specs) {
        Timer timer;
        std::vector<std::string> warnings;
        QuerySet qs;
        json inputs{{cfg.corpus.path, digest_file(cfg.corpus.path)}};
        std::visit(
            overloaded{
                [&](const Sq1Config& c) { qs = generate_sq1(docs, *idx, c); },
                [&](const Sq2Config& c) { qs = generate_sq2(docs, *idx, c, &warnings); },
                [&](const Sq3Config& c) { qs = generate_sq3(docs, *idx, c, &warnings); },
                [&](const RsqConfig& c) {
                    qs = generate_rsq(raw, c, cfg.preprocessing, &warnings);
                    if (!c.pretagged_path.empty())
                        inputs[c.pretagged_path] = digest_file(c.pretagged_path);
                    if (!spec->patterns_path.empty())
                        inputs[spec->patterns_path] = digest_file(spec->patterns_path);
                },
                [&](const LogSourceConfig& c) {
                    auto res = filter_query_log(read_query_log(c.path), *idx, cfg.preprocessing);
                    if (res.dropped_unparseable > 0)
                        warnings.push_back(std::to_string(res.dropped_unparseable) +
                                           " log lines were not valid UTF-8 and were dropped");
                    qs = std::move(res.queries);
                    inputs[c.path] = digest_file(c.path);
                }},
            spec->generator);
        for (const auto& w : warnings) log << "warning: " << spec->name << ": " << w << "\n";

        save_queryset(qs, spec->out);
        const double secs = timer.seconds();
        record_stage(m, "gen-queries:" + spec->name, secs,
                     json{{"method", spec->method},
                          {"queries", qs.queries.size()},
                          {"warnings", warnings.size()}},
                     std::move(inputs), json{{rel_out(cfg, spec->out), output_entry(spec->out)}});
        log << "generated " << spec->name << " (" << spec->method << "): " << qs.queries.size()
            << " queries in " << fixed_decimals(secs, 2) << " s\n";
    }
}

void cmd_run(const ExperimentConfig& cfg, const std::vector<std::string>& names, bool resume,
             std::ostream& log) {
    auto specs = select_specs(cfg, names);
    if (specs.empty()) {
        log << "no query sets configured\n";
        return;
    }
    const std::string idir = index_dir(cfg);
    if (!std::filesystem::is_directory(idir))
        throw DataError("run: no index snapshot at " + idir + "; run the index stage first");
    auto idx = InvertedIndex::load(idir);

    auto m = open_manifest(cfg, log);
    for (const auto* spec : specs) {
        Timer timer;
        if (!std::filesystem::is_regular_file(spec->out))
            throw DataError("run: query set file " + spec->out +
                            " does not exist; run gen-queries first");
        QuerySet qs = load_queryset(spec->out);

        AccumulateOptions opts;
        opts.workers = cfg.workers;
        opts.checkpoint_interval = cfg.checkpoint_interval;
        std::string ckpt;
        if (cfg.checkpoint_interval > 0) {
            ckpt = cfg.output_dir + "/checkpoints/" + spec->name + ".ckpt";
            opts.checkpoint_path = ckpt;
            if (resume && std::filesystem::is_regular_file(ckpt))
                opts.resume = true;
            else if (resume)
                log << "note: no checkpoint for " << spec->name
                    << "; starting from the beginning\n";
        } else if (resume) {
            log << "note: checkpointing is disabled (checkpoint_interval 0); starting "
                << spec->name << " from the beginning\n";
        }

        RetrievabilityVector v = accumulate(idx, cfg.bm25, qs, cfg.utility, opts);
        if (qs.queries.empty())
            log << "warning: query set " << spec->name << " is empty; vector is all zeros\n";

        const std::string vpath = vector_path(cfg, spec->name);
        save_vector_csv(v, vpath);
        if (!ckpt.empty()) {
            std::error_code ec;
            std::filesystem::remove(ckpt, ec);
        }
        const double secs = timer.seconds();
        double mass = 0.0;
        for (double s : v.scores) mass += s;
        record_stage(m, "run:" + spec->name, secs,
                     json{{"queries", v.meta.query_count},
                          {"total_hits", v.meta.total_hits},
                          {"total_mass", format_double(mass)}},
                     json{{rel_out(cfg, spec->out), digest_file(spec->out)}},
                     json{{rel_out(cfg, vpath), output_entry(vpath)}});
        log << "ran " << spec->name << ": " << v.meta.query_count << " queries, total mass "
            << fixed_decimals(mass, 4) << ", " << v.meta.total_hits << " hits in "
            << fixed_decimals(secs, 2) << " s\n";
    }
}

void cmd_report(const ExperimentConfig& cfg, const std::vector<std::string>& vector_files,
                std::ostream& log) {
    Timer timer;
    struct Loaded {
        std::string label;
        std::string path;
        RetrievabilityVector v;
    };
    std::vector<Loaded> loaded;
    if (!vector_files.empty()) {
        std::set<std::string> labels;
        for (const auto& path : vector_files) {
            if (!std::filesystem::is_regular_file(path))
                throw DataError("report: vector file " + path + " does not exist");
            std::string label = std::filesystem::path(path).stem().string();
            if (!labels.insert(label).second)
                throw DataError("report: two vector files share the label \"" + label +
                                "\"; rename one");
            loaded.push_back({std::move(label), path, load_vector_csv(path)});
        }
    } else {
        for (const auto& spec : cfg.query_sets) {
            std::string path = vector_path(cfg, spec.name);
            if (std::filesystem::is_regular_file(path))
                loaded.push_back({spec.name, path, load_vector_csv(path)});
            else
                log << "note: no vector for " << spec.name << " (expected " << path
                    << "); skipping\n";
        }
    }
    if (loaded.empty())
        throw DataError("report: no retrievability vectors found; run the run stage first");

    // Gini and the correlations are undefined on a zero-mass vector, so an
    // empty query set's all-zero vector is excluded rather than fatal.
    for (std::size_t i = loaded.size(); i-- > 0;) {
        double mass = 0.0;
        for (double s : loaded[i].v.scores) mass += s;
        if (mass == 0.0) {
            log << "warning: vector " << loaded[i].label
                << " has zero total mass; excluded from the report\n";
            loaded.erase(loaded.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }
    if (loaded.empty()) throw DataError("report: every vector has zero total mass");

    const std::string rdir = report_dir(cfg);
    json inputs;
    json outputs;
    for (const auto& l : loaded) inputs[rel_out(cfg, l.path)] = digest_file(l.path);

    std::vector<BiasReport> reports;
    reports.reserve(loaded.size());
    for (const auto& l : loaded) {
        auto rep = bias_report(l.v, cfg.analysis.lorenz_resolution);
        const std::string lcsv = rdir + "/lorenz_" + l.label + ".csv";
        const std::string bjson = rdir + "/bias_" + l.label + ".json";
        save_lorenz_csv(rep.lorenz, lcsv);
        save_bias_report_json(rep, "lorenz_" + l.label + ".csv", bjson);
        outputs[rel_out(cfg, lcsv)] = output_entry(lcsv);
        outputs[rel_out(cfg, bjson)] = output_entry(bjson);
        reports.push_back(std::move(rep));
    }

    // Correlation participants: query sets mentioned in configured pairs,
    // or every loaded vector when no pairs are configured (or explicit
    // files were given).
    std::vector<std::size_t> participants;
    if (!cfg.analysis.pairs.empty() && vector_files.empty()) {
        for (std::size_t i = 0; i < loaded.size(); i++) {
            bool mentioned = false;
            for (const auto& [a, b] : cfg.analysis.pairs)
                mentioned = mentioned || a == loaded[i].label || b == loaded[i].label;
            if (mentioned) participants.push_back(i);
        }
    } else {
        for (std::size_t i = 0; i < loaded.size(); i++) participants.push_back(i);
    }

    std::optional<CorrelationMatrix> corr;
    if (participants.size() >= 2) {
        std::vector<RetrievabilityVector> vs;
        std::vector<std::string> labels;
        for (auto i : participants) {
            vs.push_back(loaded[i].v);
            labels.push_back(loaded[i].label);
        }
        corr = correlate_all(vs, labels);
        const std::string cpath = rdir + "/correlation.json";
        save_correlation_json(*corr, cpath);
        outputs[rel_out(cfg, cpath)] = output_entry(cpath);
    }

    std::vector<std::pair<std::string, const LorenzCurve*>> curves;
    for (std::size_t i = 0; i < loaded.size(); i++)
        curves.emplace_back(loaded[i].label, &reports[i].lorenz);
    const std::string svg_path = rdir + "/lorenz.svg";
    write_file_atomic(svg_path, render_lorenz_svg(curves));
    outputs[rel_out(cfg, svg_path)] = output_entry(svg_path);

    std::string md = "# Retrievability bias summary\n\n";
    md += "| query set | queries | documents | total mass | Gini |\n";
    md += "|---|---:|---:|---:|---:|\n";
    for (std::size_t i = 0; i < loaded.size(); i++) {
        md += "| " + loaded[i].label + " | " + std::to_string(loaded[i].v.meta.query_count) +
              " | " + std::to_string(reports[i].n_docs) + " | " +
              fixed_decimals(reports[i].total_mass, 4) + " | " +
              fixed_decimals(reports[i].gini, 4) + " |\n";
    }
    if (corr) {
        auto label_index = [&](const std::string& name) -> std::ptrdiff_t {
            for (std::size_t i = 0; i < corr->labels.size(); i++)
                if (corr->labels[i] == name) return static_cast<std::ptrdiff_t>(i);
            return -1;
        };
        std::vector<std::pair<std::string, std::string>> rows;
        if (!cfg.analysis.pairs.empty() && vector_files.empty()) {
            rows = cfg.analysis.pairs;
        } else {
            for (std::size_t i = 0; i < corr->labels.size(); i++)
                for (std::size_t j = i + 1; j < corr->labels.size(); j++)
                    rows.emplace_back(corr->labels[i], corr->labels[j]);
        }
        md += "\n## Correlations\n\n| pair | Pearson | Kendall tau-b |\n|---|---:|---:|\n";
        for (const auto& [a, b] : rows) {
            const auto ia = label_index(a);
            const auto ib = label_index(b);
            if (ia < 0 || ib < 0) continue;  // pair names a vector that was not run
            md += "| " + a + " - " + b + " | " +
                  fixed_decimals(corr->pearson[static_cast<std::size_t>(ia)]
                                              [static_cast<std::size_t>(ib)], 4) +
                  " | " +
                  fixed_decimals(corr->kendall[static_cast<std::size_t>(ia)]
                                              [static_cast<std::size_t>(ib)], 4) +
                  " |\n";
        }
    }
    const std::string md_path = rdir + "/summary.md";
    write_file_atomic(md_path, md);
    outputs[rel_out(cfg, md_path)] = output_entry(md_path);

    const double secs = timer.seconds();
    auto m = open_manifest(cfg, log);
    record_stage(m, "report", secs, json{{"vectors", loaded.size()}}, std::move(inputs),
                 std::move(outputs));
    log << "report: " << loaded.size() << " vector" << (loaded.size() == 1 ? "" : "s") << " -> "
        << rdir << " in " << fixed_decimals(secs, 2) << " s\n";
}

}  // namespace retbias
