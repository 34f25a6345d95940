#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "retbias/index.hpp"
#include "retbias/postag.hpp"
#include "retbias/querygen.hpp"
#include "retbias/retrievability.hpp"
#include "retbias/text.hpp"

namespace retbias {

struct CorpusConfig {
    std::string path;
    CorpusFormat format = CorpusFormat::jsonl;
};

/// Query-log source for the "log" method.
struct LogSourceConfig {
    std::string path;
};

/// One configured query set: a generation method plus its knobs, a unique
/// name, and where the generated TSV goes.
struct QuerySetSpec {
    std::string method;  // sq1 | sq2 | sq3 | rsq | log
    std::string name;    // defaults to the method
    std::string out;     // defaults to <output_dir>/queries/<name>.tsv
    std::variant<Sq1Config, Sq2Config, Sq3Config, RsqConfig, LogSourceConfig> generator;
    /// Path given for the RSQ pattern table, if any; the parsed table lives
    /// in the generator config.
    std::string patterns_path;
};

struct AnalysisConfig {
    /// Query-set name pairs to correlate. Empty = every pair.
    std::vector<std::pair<std::string, std::string>> pairs;
    /// Lorenz curve points kept in reports and the plot. 0 = all.
    std::size_t lorenz_resolution = 0;
};

/// One experiment, fully described: corpus, preprocessing, retrieval model,
/// query sets, and analysis outputs. Loaded from a single JSON file.
struct ExperimentConfig {
    CorpusConfig corpus;
    PreprocessConfig preprocessing;
    std::string stopwords_path;  // empty = built-in list
    Bm25Params bm25;
    std::size_t cutoff = 100;
    UtilityFunction utility;  // utility.c mirrors cutoff
    std::vector<QuerySetSpec> query_sets;
    AnalysisConfig analysis;
    std::string output_dir;
    std::size_t workers = 1;
    std::uint64_t seed = 42;
    std::size_t checkpoint_interval = 0;

    const QuerySetSpec& query_set(std::string_view name) const;

    /// Hash of the normalized config, including the preprocessing
    /// fingerprint so stopword-file edits register. Manifests use it to
    /// detect stale outputs.
    std::string fingerprint() const;
};

/// Parses, validates, and normalizes a config file. Every referenced input
/// path must exist; unknown or mistyped keys are rejected with their full
/// key path. RETBIAS_OUTPUT_DIR overrides output_dir (and the default
/// query-set output paths derived from it).
ExperimentConfig load_experiment_config(const std::string& path);

/// Same, from already-parsed text; config_name appears in error messages.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& config_name);

}  // namespace retbias
