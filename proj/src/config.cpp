#include "retbias/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"

namespace retbias {
namespace {

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known) fail(where, "unknown key \"" + it.key() + "\"");
    }
}

const json& member(const json& obj, const std::string& where, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing required key \"") + key + "\"");
    return *it;
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
}

std::string get_string(const json& obj, const std::string& where, const char* key) {
    return as_string(member(obj, where, key), where + "." + key);
}

std::string get_string_or(const json& obj, const std::string& where, const char* key,
                          std::string fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return as_string(*it, where + "." + key);
}

bool get_bool_or(const json& obj, const std::string& where, const char* key, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) fail(where + "." + key, "expected true or false");
    return it->get<bool>();
}

double get_double_or(const json& obj, const std::string& where, const char* key,
                     double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) fail(where + "." + key, "expected a number");
    return it->get<double>();
}

std::uint64_t get_uint_or(const json& obj, const std::string& where, const std::string& key,
                          std::uint64_t fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_unsigned()) fail(where + "." + key, "expected a non-negative integer");
    return it->get<std::uint64_t>();
}

void require_file(const std::string& path, const std::string& where) {
    if (path.empty()) fail(where, "empty path");
    if (!std::filesystem::is_regular_file(path)) fail(where, "file does not exist: " + path);
}

Sq1Config parse_sq1(const json& obj, const std::string& where) {
    check_keys(obj, where, {"min_unigram_cf", "min_bigram_cf", "max_bigrams"});
    Sq1Config cfg;
    cfg.min_unigram_cf = get_uint_or(obj, where, "min_unigram_cf", cfg.min_unigram_cf);
    cfg.min_bigram_cf = get_uint_or(obj, where, "min_bigram_cf", cfg.min_bigram_cf);
    cfg.max_bigrams = static_cast<std::size_t>(get_uint_or(obj, where, "max_bigrams", cfg.max_bigrams));
    cfg.validate();
    return cfg;
}

Sq2Config parse_sq2(const json& obj, const std::string& where) {
    check_keys(obj, where, {"min_within_doc_tf", "max_terms", "df_ceiling_fraction", "per_doc_cap"});
    Sq2Config cfg;
    cfg.min_within_doc_tf =
        static_cast<std::uint32_t>(get_uint_or(obj, where, "min_within_doc_tf", cfg.min_within_doc_tf));
    cfg.max_terms = static_cast<std::size_t>(get_uint_or(obj, where, "max_terms", cfg.max_terms));
    cfg.df_ceiling_fraction = get_double_or(obj, where, "df_ceiling_fraction", cfg.df_ceiling_fraction);
    cfg.per_doc_cap = static_cast<std::size_t>(get_uint_or(obj, where, "per_doc_cap", cfg.per_doc_cap));
    cfg.validate();
    return cfg;
}

Sq3Config parse_sq3(const json& obj, const std::string& where, std::uint64_t default_seed) {
    check_keys(obj, where, {"num_clusters", "terms_per_cluster", "seed", "kmeans_max_iters"});
    Sq3Config cfg;
    cfg.seed = default_seed;
    cfg.num_clusters = static_cast<std::size_t>(get_uint_or(obj, where, "num_clusters", cfg.num_clusters));
    cfg.terms_per_cluster =
        static_cast<std::size_t>(get_uint_or(obj, where, "terms_per_cluster", cfg.terms_per_cluster));
    cfg.seed = get_uint_or(obj, where, "seed", cfg.seed);
    cfg.kmeans_max_iters =
        static_cast<std::size_t>(get_uint_or(obj, where, "kmeans_max_iters", cfg.kmeans_max_iters));
    cfg.validate();
    return cfg;
}

RsqConfig parse_rsq(const json& obj, const std::string& where, std::string& patterns_path) {
    check_keys(obj, where, {"total_budget", "quotas", "tagger", "pretagged", "patterns"});
    RsqConfig cfg;
    cfg.total_budget = static_cast<std::size_t>(get_uint_or(obj, where, "total_budget", cfg.total_budget));
    if (auto it = obj.find("quotas"); it != obj.end()) {
        const std::string qwhere = where + ".quotas";
        check_keys(*it, qwhere, {"1", "2", "3", "4"});
        cfg.explicit_quotas = true;
        for (std::size_t n = 1; n <= 4; n++)
            cfg.quotas[n] = static_cast<std::size_t>(get_uint_or(*it, qwhere, std::to_string(n), 0));
    }
    cfg.tagger = get_string_or(obj, where, "tagger", cfg.tagger);
    cfg.pretagged_path = get_string_or(obj, where, "pretagged", "");
    if (auto it = obj.find("patterns"); it != obj.end()) {
        patterns_path = as_string(*it, where + ".patterns");
        require_file(patterns_path, where + ".patterns");
        cfg.patterns = PatternTable::from_json_file(patterns_path);
    }
    if (cfg.tagger == "pretagged") require_file(cfg.pretagged_path, where + ".pretagged");
    cfg.validate();
    return cfg;
}

LogSourceConfig parse_log(const json& obj, const std::string& where) {
    check_keys(obj, where, {"path"});
    LogSourceConfig cfg;
    cfg.path = get_string(obj, where, "path");
    require_file(cfg.path, where + ".path");
    return cfg;
}

void check_name(const std::string& name, const std::string& where) {
    if (name.empty()) fail(where, "empty name");
    for (char ch : name) {
        bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' || ch == '-';
        if (!ok) fail(where, "name \"" + name + "\" may only contain letters, digits, '.', '_', '-'");
    }
}

json dump_generator(const QuerySetSpec& spec) {
    return std::visit(
        overloaded{
            [](const Sq1Config& c) {
                return json{{"max_bigrams", c.max_bigrams},
                            {"min_bigram_cf", c.min_bigram_cf},
                            {"min_unigram_cf", c.min_unigram_cf}};
            },
            [](const Sq2Config& c) {
                return json{{"df_ceiling_fraction", format_double(c.df_ceiling_fraction)},
                            {"max_terms", c.max_terms},
                            {"min_within_doc_tf", c.min_within_doc_tf},
                            {"per_doc_cap", c.per_doc_cap}};
            },
            [](const Sq3Config& c) {
                return json{{"kmeans_max_iters", c.kmeans_max_iters},
                            {"num_clusters", c.num_clusters},
                            {"seed", c.seed},
                            {"terms_per_cluster", c.terms_per_cluster}};
            },
            [&spec](const RsqConfig& c) {
                auto q = c.resolved_quotas();
                return json{{"patterns", spec.patterns_path},
                            {"pretagged", c.pretagged_path},
                            {"quotas", {q[1], q[2], q[3], q[4]}},
                            {"tagger", c.tagger},
                            {"total_budget", c.total_budget}};
            },
            [](const LogSourceConfig& c) { return json{{"path", c.path}}; }},
        spec.generator);
}

}  // namespace

const QuerySetSpec& ExperimentConfig::query_set(std::string_view name) const {
    for (const auto& qs : query_sets)
        if (qs.name == name) return qs;
    throw ConfigError("config: no query set named \"" + std::string(name) + "\"");
}

// Covers every knob that can change result bytes. Output locations,
// workers, and checkpoint_interval are deliberately absent: results are
// proven invariant under them, so relocated or re-parallelized reruns
// still match their manifest.
std::string ExperimentConfig::fingerprint() const {
    json j;
    json pairs = json::array();
    for (const auto& [a, b] : analysis.pairs) pairs.push_back({a, b});
    j["analysis"] = {{"lorenz_resolution", analysis.lorenz_resolution}, {"pairs", pairs}};
    j["bm25"] = {{"b", format_double(bm25.b)}, {"k1", format_double(bm25.k1)}};
    j["corpus"] = {{"format", corpus.format == CorpusFormat::jsonl ? "jsonl" : "trec_text"},
                   {"path", corpus.path}};
    j["cutoff"] = cutoff;
    j["preprocessing"] = preprocessing.fingerprint();
    json sets = json::array();
    for (const auto& spec : query_sets)
        sets.push_back({{"config", dump_generator(spec)},
                        {"method", spec.method},
                        {"name", spec.name}});
    j["query_sets"] = sets;
    j["seed"] = seed;
    j["utility"] = {{"beta", format_double(utility.beta)},
                    {"c", utility.c},
                    {"kind", utility_kind_name(utility.kind)}};
    return fnv1a_hex(j.dump());
}

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& config_name) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + config_name + " is not valid JSON: " + e.what());
    }
    check_keys(root, config_name,
               {"corpus", "preprocessing", "bm25", "cutoff", "utility", "query_sets", "analysis",
                "output_dir", "workers", "seed", "checkpoint_interval"});

    ExperimentConfig cfg;

    {
        const json& c = member(root, config_name, "corpus");
        check_keys(c, "corpus", {"path", "format"});
        cfg.corpus.path = get_string(c, "corpus", "path");
        require_file(cfg.corpus.path, "corpus.path");
        cfg.corpus.format = parse_corpus_format(get_string_or(c, "corpus", "format", "jsonl"));
    }

    if (auto it = root.find("preprocessing"); it != root.end()) {
        check_keys(*it, "preprocessing", {"stopwords", "stemming"});
        if (auto sw = it->find("stopwords"); sw != it->end() && !sw->is_null()) {
            cfg.stopwords_path = as_string(*sw, "preprocessing.stopwords");
            require_file(cfg.stopwords_path, "preprocessing.stopwords");
            cfg.preprocessing.stopwords = load_stopwords(cfg.stopwords_path);
        }
        cfg.preprocessing.stemming = get_bool_or(*it, "preprocessing", "stemming", true);
    }

    if (auto it = root.find("bm25"); it != root.end()) {
        check_keys(*it, "bm25", {"k1", "b"});
        cfg.bm25.k1 = get_double_or(*it, "bm25", "k1", cfg.bm25.k1);
        cfg.bm25.b = get_double_or(*it, "bm25", "b", cfg.bm25.b);
    }
    cfg.bm25.validate();

    cfg.cutoff = static_cast<std::size_t>(get_uint_or(root, config_name, "cutoff", cfg.cutoff));

    if (auto it = root.find("utility"); it != root.end()) {
        check_keys(*it, "utility", {"kind", "beta"});
        cfg.utility.kind = parse_utility_kind(get_string_or(*it, "utility", "kind", "cumulative"));
        cfg.utility.beta = get_double_or(*it, "utility", "beta", cfg.utility.beta);
    }
    cfg.utility.c = cfg.cutoff;
    cfg.utility.validate();

    cfg.output_dir = get_string(root, config_name, "output_dir");
    if (const char* env = std::getenv("RETBIAS_OUTPUT_DIR"); env != nullptr && *env != '\0')
        cfg.output_dir = env;
    if (cfg.output_dir.empty()) fail("output_dir", "empty path");

    cfg.workers = static_cast<std::size_t>(get_uint_or(root, config_name, "workers", cfg.workers));
    if (cfg.workers == 0) fail("workers", "must be at least 1");
    cfg.seed = get_uint_or(root, config_name, "seed", cfg.seed);
    cfg.checkpoint_interval = static_cast<std::size_t>(
        get_uint_or(root, config_name, "checkpoint_interval", cfg.checkpoint_interval));

    if (auto it = root.find("query_sets"); it != root.end()) {
        if (!it->is_array()) fail("query_sets", "expected an array");
        std::set<std::string> names;
        std::set<std::string> outs;
        for (std::size_t i = 0; i < it->size(); i++) {
            const json& entry = (*it)[i];
            const std::string where = "query_sets[" + std::to_string(i) + "]";
            check_keys(entry, where, {"method", "name", "config", "out"});

            QuerySetSpec spec;
            spec.method = get_string(entry, where, "method");
            spec.name = get_string_or(entry, where, "name", spec.method);
            check_name(spec.name, where + ".name");
            if (!names.insert(spec.name).second)
                fail(where + ".name", "duplicate query set name \"" + spec.name +
                                          "\"; give each entry a distinct \"name\"");

            json gen_obj = json::object();
            if (auto g = entry.find("config"); g != entry.end()) gen_obj = *g;
            const std::string gwhere = where + ".config";
            if (spec.method == "sq1") {
                spec.generator = parse_sq1(gen_obj, gwhere);
            } else if (spec.method == "sq2") {
                spec.generator = parse_sq2(gen_obj, gwhere);
            } else if (spec.method == "sq3") {
                spec.generator = parse_sq3(gen_obj, gwhere, cfg.seed);
            } else if (spec.method == "rsq") {
                spec.generator = parse_rsq(gen_obj, gwhere, spec.patterns_path);
            } else if (spec.method == "log") {
                spec.generator = parse_log(gen_obj, gwhere);
            } else {
                fail(where + ".method", "unknown method \"" + spec.method +
                                            "\" (expected sq1, sq2, sq3, rsq, or log)");
            }

            spec.out = get_string_or(entry, where, "out",
                                     cfg.output_dir + "/queries/" + spec.name + ".tsv");
            if (spec.out.empty()) fail(where + ".out", "empty path");
            if (!outs.insert(spec.out).second)
                fail(where + ".out", "output path \"" + spec.out + "\" used twice");

            cfg.query_sets.push_back(std::move(spec));
        }
    }

    if (auto it = root.find("analysis"); it != root.end()) {
        check_keys(*it, "analysis", {"pairs", "lorenz_resolution"});
        cfg.analysis.lorenz_resolution = static_cast<std::size_t>(
            get_uint_or(*it, "analysis", "lorenz_resolution", cfg.analysis.lorenz_resolution));
        if (auto pairs = it->find("pairs"); pairs != it->end()) {
            if (!pairs->is_array()) fail("analysis.pairs", "expected an array of [name, name] pairs");
            for (std::size_t i = 0; i < pairs->size(); i++) {
                const json& p = (*pairs)[i];
                const std::string where = "analysis.pairs[" + std::to_string(i) + "]";
                if (!p.is_array() || p.size() != 2) fail(where, "expected a [name, name] pair");
                std::string a = as_string(p[0], where);
                std::string b = as_string(p[1], where);
                cfg.query_set(a);  // throws on unknown names
                cfg.query_set(b);
                if (a == b) fail(where, "pair correlates \"" + a + "\" with itself");
                cfg.analysis.pairs.emplace_back(std::move(a), std::move(b));
            }
        }
    }

    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    if (!std::filesystem::is_regular_file(path))
        throw ConfigError("config: cannot read " + path);
    return parse_experiment_config(read_file_bytes(path), path);
}

}  // namespace retbias
