#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "retbias/corpus.hpp"
#include "retbias/queryset.hpp"

namespace retbias {

enum class PosTag { noun, adj, verb, adp, adv, other };

PosTag pos_tag_from_name(std::string_view name);
std::string_view pos_tag_name(PosTag tag);

struct TaggedToken {
    std::string token;
    PosTag tag = PosTag::noun;
};

/// Tag sequences considered query-like, per N-gram length 1..4 (index 0 unused).
struct PatternTable {
    std::array<std::set<std::vector<PosTag>>, 5> patterns;

    static PatternTable defaults();
    /// JSON object {"1": ["noun"], "2": ["adj noun", ...], ...}.
    static PatternTable from_json_file(const std::string& path);
};

/// Lexicon lookup (most-frequent coarse tag), then suffix fallback for
/// unknown words: ly -> adv; ous/ful/ive/al -> adj; ize/ate/ify -> verb;
/// closed adposition list -> adp; otherwise noun. Suffixes only fire on
/// words strictly longer than the suffix.
std::vector<TaggedToken> pos_tag(const std::vector<std::string>& tokens);

/// Yields every contiguous window (length 1..4) whose tag sequence is in
/// the table, as (terms, N). Windows never cross the token sequence end.
void match_patterns(const std::vector<TaggedToken>& tagged, const PatternTable& table,
                    const std::function<void(const std::vector<std::string>&, std::size_t)>& yield);

struct RsqConfig {
    /// Per-N caps, indexes 1..4. Used only when explicit_quotas is set;
    /// otherwise derived from total_budget as 30/40/20/10 percent.
    std::array<std::size_t, 5> quotas{};
    bool explicit_quotas = false;
    std::size_t total_budget = 10000;
    std::string tagger = "builtin";  // "builtin" | "pretagged"
    std::string pretagged_path;      // TSV doc_id/token/tag, pretagged mode
    PatternTable patterns = PatternTable::defaults();

    void validate() const;
    std::array<std::size_t, 5> resolved_quotas() const;
};

/// Pretagged input: TSV rows doc_id / token / tag in document order;
/// consecutive rows with the same doc_id form one document.
std::vector<std::pair<std::string, std::vector<TaggedToken>>> read_pretagged(
    const std::string& path);

/// Tags raw tokens, counts pattern-matching N-grams corpus-wide, ranks each
/// N by frequency descending (ties lexicographic), truncates at the quotas,
/// then preprocesses the selected N-grams (stopword filter + stem), drops
/// empties and deduplicates. Disjunctive, weight 1.
QuerySet generate_rsq(const std::vector<RawDocument>& docs, const RsqConfig& cfg,
                      const PreprocessConfig& pcfg, std::vector<std::string>* warnings = nullptr);

}  // namespace retbias
