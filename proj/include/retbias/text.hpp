#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace retbias {

/// Maximal runs of ASCII alphanumerics, lowercased; every other byte is a
/// separator. Multi-byte UTF-8 sequences therefore split tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Porter stemming algorithm (1980), matching the author's reference
/// implementation including its documented departures (bli->ble, logi->log,
/// and leaving words of length <= 2 untouched).
/// Expects a lowercase token; the output is not necessarily idempotent.
std::string porter_stem(std::string_view token);

/// The SMART stopword list (571 entries, lowercase).
const std::set<std::string>& smart_stopwords();

struct PreprocessConfig {
    std::set<std::string> stopwords = smart_stopwords();
    bool stemming = true;
    /// Descriptive label for the token boundary rule; folded into the
    /// fingerprint so pipelines with different tokenizers cannot be mixed.
    std::string token_rule = "ascii-alnum";

    /// Identity of this preprocessing pipeline. Query sets and index
    /// snapshots must agree on it before scores are comparable.
    std::string fingerprint() const;
};

/// tokenize -> stopword filter -> stem. Stopword membership is checked on
/// the unstemmed token, so a token whose *stem* collides with a stopword
/// survives.
std::vector<std::string> preprocess_text(std::string_view text, const PreprocessConfig& cfg);

/// The intermediate stage of preprocess_text: tokens after stopword
/// filtering, before stemming.
std::vector<std::string> filter_stopwords(std::vector<std::string> tokens,
                                          const PreprocessConfig& cfg);

/// Loads one stopword per line, lowercased; '#' lines and blanks ignored.
std::set<std::string> load_stopwords(const std::string& path);

}  // namespace retbias
