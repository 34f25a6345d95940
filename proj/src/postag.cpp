#include "retbias/postag.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "retbias/common.hpp"
#include "retbias/text.hpp"

namespace retbias {

namespace {

// Most-frequent coarse tag per word. Sections open with !tag. The noun
// section leans toward words whose suffix would otherwise mis-tag them
// (family, hospital, size, climate); the default tag is noun anyway.
constexpr const char* kTagLexicon = R"(
!noun
time year people way day man men thing woman women life child children world
school state family student group country problem hand part place case week
company system program question work government number night point home water
room mother area money story fact month book eye job word business issue side
head house service friend father power hour game line end member law car city
community name president team minute idea body information parent face level
office door health person art war history party result morning reason research
girl guy moment air teacher force education dog cat tax income bank river tree
road food music market paper oil energy sun moon star earth sea fish bird
horse computer phone science field data model test plan report news price cost
town street boy table chair window wall floor doctor engine wheel glass stone
metal wood gold silver winter summer rain snow wind storm cloud fire mountain
lake ocean island forest farm garden leaf flower fruit bread milk coffee tea
card letter page note film movie song picture photo camera radio language
culture society economy industry technology medicine hospital police army
soldier battle peace election vote leader policy budget trade factory worker
manager customer product tool machine device network signal message article
author reader writer novel poem chapter title subject topic unit weight height
depth width length distance speed temperature pressure volume matter material
element atom cell brain heart blood bone skin hair mouth nose ear arm leg foot
finger shoulder knee chest voice sound noise shadow color shape size form
pattern structure method goal target purpose effect cause response answer
solution conclusion decision choice chance opportunity risk danger safety
security damage injury accident event situation condition stage phase period
century decade season weekend holiday birthday audience crowd kind sort type
example sentence query document term corpus rank score cluster sample animal
capital festival interval arrival proposal approval removal survival climate
candidate chocolate senate plate gate date rate debate estate pirate fate mate
butterfly supply july assembly monopoly ally rally belly jelly prize handful
olive motive detective perspective village
!verb
be is are was were been being am have has had do does did done say said says
go goes went gone get gets got gotten make makes made know knew known think
thinks thought take takes took taken see sees saw seen come comes came want
wanted look looked use used find found give gave given tell told call called
try tried ask asked need needed feel felt become became leave left put mean
meant keep kept let begin began begun seem seemed help helped talk talked turn
turned start started show showed shown hear heard play played run ran move
moved like live lived believe bring brought happen happened write wrote
written provide sit sat stand stood lose lost pay paid meet met include
included continue set learn learned lead led understand understood watch speak
spoke spoken read allow allowed add added spend spent grow grew grown open
walk walked win won offer offered remember love loved consider appear buy
bought wait waited serve served die died send sent expect build built stay
stayed fall fell fallen cut reach kill killed remain eat ate eaten drink drank
sleep slept fly flew flown drive drove driven ride rode sing sang swim swam
throw threw thrown catch caught teach taught wear wore worn choose chose
chosen break broke broken forget forgot forgotten draw drew drawn hold held
hide hid steal stole rise rose risen shake shook sell sold visit apply reply
arrive survive receive create relate operate shall should can could may might
must will would
!adj
good new first last long great little own other old right big high different
small large next early young important few public bad same able red blue
green black white yellow brown strong weak hot cold warm cool happy sad hard
soft easy difficult heavy dark bright clean dirty rich poor full empty free
cheap expensive tall short wide narrow deep shallow thick thin quick quiet
loud dry wet slow fast safe main major minor real true false wrong nice fine
huge tiny modern ancient common rare simple complex single double whole fresh
sweet sour bitter smart clever stupid angry calm proud humble brave afraid
ready busy lazy healthy sick ill dead alive female male human wild private
accurate delicate ultimate immediate appropriate late likely friendly lovely
lonely elderly holy curly silly ugly
!adv
not very never always often again soon too also well just still even now here
there today tomorrow yesterday then almost quite rather instead together
maybe perhaps away once twice forever anywhere everywhere nowhere somewhere
sometimes seldom back far ahead apart aside anymore meanwhile moreover
nevertheless however therefore thus hence otherwise anyway so else ever up
down out
!other
the a an this that these those i you he she it we they me him her us them my
your his its our their mine yours hers ours theirs who whom whose which what
where when why how and or but nor yet if because while although though unless
whereas whether than as all any both each either neither some many much more
most several such one two three four five six seven eight nine ten hundred
thousand million none nothing something anything everything someone anyone
everyone nobody somebody anybody everybody no yes
)";

const std::unordered_map<std::string, PosTag>& tag_lexicon() {
    static const std::unordered_map<std::string, PosTag> map = [] {
        std::unordered_map<std::string, PosTag> m;
        std::istringstream in(kTagLexicon);
        std::string word;
        PosTag current = PosTag::noun;
        while (in >> word) {
            if (word[0] == '!') {
                current = pos_tag_from_name(std::string_view(word).substr(1));
                continue;
            }
            if (!m.emplace(word, current).second)
                throw Error("tag lexicon: duplicate entry " + word);
        }
        return m;
    }();
    return map;
}

const std::set<std::string, std::less<>>& adpositions() {
    static const std::set<std::string, std::less<>> list = {
        "of",      "in",      "to",      "for",        "with",       "on",      "at",
        "by",      "from",    "about",   "into",       "over",       "after",   "under",
        "above",   "below",   "between", "among",      "through",    "during",  "before",
        "around",  "against", "within",  "without",    "along",      "across",  "behind",
        "beyond",  "near",    "toward",  "towards",    "upon",       "onto",    "off",
        "per",     "via",     "amid",    "amidst",     "despite",    "except",  "until",
        "unto",    "atop",    "beside",  "besides",    "underneath", "throughout",
        "inside",  "outside", "since"};
    return list;
}

bool has_proper_suffix(std::string_view word, std::string_view suffix) {
    return word.size() > suffix.size() &&
           word.substr(word.size() - suffix.size()) == suffix;
}

PosTag tag_one(const std::string& token) {
    const auto& lex = tag_lexicon();
    if (auto it = lex.find(token); it != lex.end()) return it->second;
    if (has_proper_suffix(token, "ly")) return PosTag::adv;
    for (std::string_view s : {"ous", "ful", "ive", "al"})
        if (has_proper_suffix(token, s)) return PosTag::adj;
    for (std::string_view s : {"ize", "ate", "ify"})
        if (has_proper_suffix(token, s)) return PosTag::verb;
    if (adpositions().count(token)) return PosTag::adp;
    return PosTag::noun;
}

std::vector<PosTag> parse_pattern(std::string_view pattern) {
    std::vector<PosTag> tags;
    std::istringstream in{std::string(pattern)};
    std::string name;
    while (in >> name) tags.push_back(pos_tag_from_name(name));
    return tags;
}

}  // namespace

PosTag pos_tag_from_name(std::string_view name) {
    if (name == "noun") return PosTag::noun;
    if (name == "adj") return PosTag::adj;
    if (name == "verb") return PosTag::verb;
    if (name == "adp") return PosTag::adp;
    if (name == "adv") return PosTag::adv;
    if (name == "other") return PosTag::other;
    throw ConfigError("unknown tag name: " + std::string(name));
}

std::string_view pos_tag_name(PosTag tag) {
    switch (tag) {
        case PosTag::noun: return "noun";
        case PosTag::adj: return "adj";
        case PosTag::verb: return "verb";
        case PosTag::adp: return "adp";
        case PosTag::adv: return "adv";
        case PosTag::other: return "other";
    }
    throw Error("invalid tag value");
}

PatternTable PatternTable::defaults() {
    static const char* kRows[] = {
        "noun",
        "adj noun", "noun noun",
        "adj adj noun", "adj noun noun", "noun adj noun", "noun noun noun", "noun adp noun",
        "noun verb adp noun", "adj noun adj noun", "noun adp adj noun", "noun noun adp noun",
        "noun verb noun noun", "adv adj noun noun", "adj noun verb noun", "noun adj noun noun",
    };
    PatternTable table;
    for (const char* row : kRows) {
        std::vector<PosTag> tags = parse_pattern(row);
        table.patterns[tags.size()].insert(std::move(tags));
    }
    return table;
}

PatternTable PatternTable::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open pattern file: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": malformed JSON");
    if (!doc.is_object()) throw ConfigError(path + ": expected a JSON object");
    PatternTable table;
    for (const auto& [key, value] : doc.items()) {
        if (key.size() != 1 || key[0] < '1' || key[0] > '4')
            throw ConfigError(path + ": pattern group keys must be \"1\" through \"4\", got " +
                              key);
        std::size_t n = static_cast<std::size_t>(key[0] - '0');
        if (!value.is_array()) throw ConfigError(path + ": group " + key + " must be an array");
        for (const auto& entry : value) {
            if (!entry.is_string())
                throw ConfigError(path + ": group " + key + " entries must be strings");
            std::vector<PosTag> tags = parse_pattern(entry.get<std::string>());
            if (tags.size() != n)
                throw ConfigError(path + ": pattern \"" + entry.get<std::string>() +
                                  "\" has " + std::to_string(tags.size()) +
                                  " tags but sits in group " + key);
            table.patterns[n].insert(std::move(tags));
        }
    }
    return table;
}

std::vector<TaggedToken> pos_tag(const std::vector<std::string>& tokens) {
    std::vector<TaggedToken> tagged;
    tagged.reserve(tokens.size());
    for (const auto& t : tokens) tagged.push_back({t, tag_one(t)});
    return tagged;
}

void match_patterns(const std::vector<TaggedToken>& tagged, const PatternTable& table,
                    const std::function<void(const std::vector<std::string>&, std::size_t)>& yield) {
    const std::size_t n = tagged.size();
    std::vector<PosTag> window_tags;
    std::vector<std::string> window_terms;
    for (std::size_t start = 0; start < n; start++) {
        window_tags.clear();
        for (std::size_t len = 1; len <= 4 && start + len <= n; len++) {
            window_tags.push_back(tagged[start + len - 1].tag);
            if (!table.patterns[len].count(window_tags)) continue;
            window_terms.clear();
            for (std::size_t i = 0; i < len; i++) window_terms.push_back(tagged[start + i].token);
            yield(window_terms, len);
        }
    }
}

void RsqConfig::validate() const {
    if (tagger != "builtin" && tagger != "pretagged")
        throw ConfigError("rsq.tagger must be builtin or pretagged");
    if (tagger == "pretagged" && pretagged_path.empty())
        throw ConfigError("rsq.tagger pretagged requires a pretagged_path");
    if (!explicit_quotas && total_budget < 1)
        throw ConfigError("rsq.total_budget must be positive");
}

std::array<std::size_t, 5> RsqConfig::resolved_quotas() const {
    if (explicit_quotas) return {0, quotas[1], quotas[2], quotas[3], quotas[4]};
    std::uint64_t b = total_budget;
    return {0, static_cast<std::size_t>(b * 30 / 100), static_cast<std::size_t>(b * 40 / 100),
            static_cast<std::size_t>(b * 20 / 100), static_cast<std::size_t>(b * 10 / 100)};
}

std::vector<std::pair<std::string, std::vector<TaggedToken>>> read_pretagged(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pretagged file: " + path);
    std::vector<std::pair<std::string, std::vector<TaggedToken>>> docs;
    std::set<std::string> finished;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        line_no++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string_view sv(line);
        std::size_t t1 = sv.find('\t');
        std::size_t t2 = t1 == std::string_view::npos ? t1 : sv.find('\t', t1 + 1);
        if (t2 == std::string_view::npos || sv.find('\t', t2 + 1) != std::string_view::npos)
            fail("expected 3 tab-separated fields");
        std::string doc_id(sv.substr(0, t1));
        std::string token(sv.substr(t1 + 1, t2 - t1 - 1));
        std::string_view tag_name = sv.substr(t2 + 1);
        if (doc_id.empty()) fail("empty doc_id");
        if (token.empty()) fail("empty token");
        if (token != to_lower_ascii(token)) fail("token must be lowercase: " + token);
        PosTag tag;
        try {
            tag = pos_tag_from_name(tag_name);
        } catch (const ConfigError&) {
            fail("unknown tag: " + std::string(tag_name));
            throw;  // unreachable
        }
        if (docs.empty() || docs.back().first != doc_id) {
            if (!finished.insert(doc_id).second)
                fail("doc_id " + doc_id + " reappears after other documents");
            docs.push_back({doc_id, {}});
        }
        docs.back().second.push_back({std::move(token), tag});
    }
    return docs;
}

QuerySet generate_rsq(const std::vector<RawDocument>& docs, const RsqConfig& cfg,
                      const PreprocessConfig& pcfg, std::vector<std::string>* warnings) {
    cfg.validate();
    std::array<std::size_t, 5> quotas = cfg.resolved_quotas();

    std::array<std::map<std::vector<std::string>, std::uint64_t>, 5> counts;
    auto count_doc = [&](const std::vector<TaggedToken>& tagged) {
        match_patterns(tagged, cfg.patterns,
                       [&](const std::vector<std::string>& terms, std::size_t n) {
                           counts[n][terms]++;
                       });
    };
    if (cfg.tagger == "builtin") {
        for (const auto& doc : docs) count_doc(pos_tag(tokenize(doc.text)));
    } else {
        for (const auto& [id, tagged] : read_pretagged(cfg.pretagged_path)) count_doc(tagged);
    }

    QuerySet qs;
    qs.provenance = "RSQ";
    qs.preprocess_fingerprint = pcfg.fingerprint();
    {
        std::vector<Document> prepped;
        prepped.reserve(docs.size());
        for (const auto& d : docs) prepped.push_back(preprocess(d, pcfg));
        qs.corpus_digest = corpus_digest(prepped);
    }
    {
        nlohmann::json patterns = nlohmann::json::object();
        for (std::size_t n = 1; n <= 4; n++) {
            std::vector<std::string> rows;
            for (const auto& tags : cfg.patterns.patterns[n]) {
                std::string row;
                for (PosTag t : tags) {
                    if (!row.empty()) row += ' ';
                    row += pos_tag_name(t);
                }
                rows.push_back(std::move(row));
            }
            std::sort(rows.begin(), rows.end());
            patterns[std::to_string(n)] = rows;
        }
        nlohmann::json config{{"quotas", {quotas[1], quotas[2], quotas[3], quotas[4]}},
                              {"tagger", cfg.tagger},
                              {"pretagged_path", cfg.pretagged_path},
                              {"patterns", patterns}};
        qs.config_fingerprint = queryset_fingerprint("rsq", config.dump(),
                                                     qs.preprocess_fingerprint, qs.corpus_digest);
    }

    std::set<std::vector<std::string>> seen;
    std::size_t dropped_empty = 0;
    for (std::size_t n = 1; n <= 4; n++) {
        std::vector<std::pair<const std::vector<std::string>*, std::uint64_t>> ranked;
        ranked.reserve(counts[n].size());
        for (const auto& [terms, freq] : counts[n]) ranked.emplace_back(&terms, freq);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return *a.first < *b.first;
        });
        if (ranked.size() > quotas[n]) ranked.resize(quotas[n]);
        for (const auto& [terms, freq] : ranked) {
            std::vector<std::string> q = filter_stopwords(*terms, pcfg);
            if (pcfg.stemming)
                for (auto& t : q) t = porter_stem(t);
            if (q.empty()) {
                dropped_empty++;
                continue;
            }
            if (seen.insert(q).second)
                qs.queries.push_back({std::move(q), 1.0, QueryMode::disjunctive});
        }
    }
    if (dropped_empty > 0 && warnings)
        warnings->push_back("rsq: " + std::to_string(dropped_empty) +
                            " selected n-grams reduced to nothing after preprocessing");
    return qs;
}

}  // namespace retbias
