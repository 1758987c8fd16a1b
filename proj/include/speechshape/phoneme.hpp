#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "speechshape/blendshape.hpp"
#include "speechshape/errors.hpp"

namespace speechshape {

enum class Lang { zh, en };

Lang lang_from_string(const std::string& s);
std::string lang_to_string(Lang lang);

enum class PhonemeClass {
    bilabial,
    labiodental,
    rounded_vowel,
    open_vowel,
    close_vowel,
    alveolar,
    velar,
    other,
    silence,
};

std::string phoneme_class_name(PhonemeClass cls);

struct Phoneme {
    std::string symbol; // as annotated, e.g. "AH0", "b", "ao3", "sil"
    Lang language = Lang::en;
    PhonemeClass cls = PhonemeClass::other;
    std::optional<int> stress_or_tone; // ARPAbet stress 0/1/2 or Pinyin tone 1..5
};

struct TimeSpan {
    double start = 0.0;
    double end = 0.0;
    double length() const { return end - start; }
    double mid() const { return 0.5 * (start + end); }
};

struct PhonemeSequence {
    Lang language = Lang::en;
    std::vector<Phoneme> items;
    /// Optional timing hints, one per item, seconds relative to the owner.
    std::vector<TimeSpan> spans;

    bool has_spans() const { return !spans.empty(); }
    std::size_t size() const { return items.size(); }
    bool all_silence() const;
};

/// Classify and validate a symbol against the language inventory.
/// Throws on symbols outside the inventory.
Phoneme make_phoneme(const std::string& symbol, Lang lang);
bool is_known_symbol(const std::string& symbol, Lang lang);

/// Canonical symbol for silence markers ("sil", "sp", "" map here).
extern const char* kSilenceSymbol;

/// Base inventory symbols per language (vowels without stress digits,
/// finals without tone digits), including the silence marker.
std::vector<std::string> inventory_symbols(Lang lang);

/// Word-to-pronunciation lookup, `word<TAB>phoneme phoneme ...` per line.
class Lexicon {
public:
    static Lexicon from_text(const std::string& text);
    static Lexicon load(const std::string& path);

    const std::vector<std::string>* find(const std::string& word) const;
    std::size_t size() const { return entries_.size(); }

    /// Longest entry length in codepoints; used for greedy segmentation.
    std::size_t max_key_codepoints() const { return max_key_cps_; }

private:
    std::map<std::string, std::vector<std::string>> entries_;
    std::size_t max_key_cps_ = 0;
};

/// Lexicon- and rule-based phonemization. English words are looked up as-is;
/// Chinese text is handled as whitespace-separated pinyin syllables (rule
/// decomposition with tone digits) or unspaced lexicon words, longest match
/// first. A silence marker separates sentence-final punctuation groups.
PhonemeSequence phonemize(const std::string& text, Lang lang, const Lexicon& lexicon);

/// Decompose one pinyin syllable (optional trailing tone digit) into
/// initial + toned final. Returns empty when the syllable does not parse.
std::vector<std::string> pinyin_decompose(const std::string& syllable);

struct ArticulationPrior {
    std::map<std::string, double> targets; // channel -> value in [0,1]
    double dominance = 1.0;
    double nominal_duration = 0.08; // seconds
};

/// Per-class articulation targets with optional per-symbol overrides,
/// loaded from the versioned prior-table JSON and validated against the
/// active channel schema.
class PriorTable {
public:
    static PriorTable from_json_text(const std::string& text, const ChannelSchema& schema);
    static PriorTable load(const std::string& path, const ChannelSchema& schema);

    ArticulationPrior prior_for(const Phoneme& phoneme) const;
    const ChannelSchema& schema() const { return schema_; }

private:
    struct Row {
        ArticulationPrior prior;
        double stress_gain = 1.0; // target multiplier under primary stress
    };
    std::map<PhonemeClass, Row> class_rows_;
    std::map<std::string, Row> symbol_rows_;
    ChannelSchema schema_;
};

/// Validate a symbol and return its prior row.
ArticulationPrior articulation_prior(const std::string& symbol, Lang lang,
                                     const PriorTable& table);

/// Deterministic guidance block naming each distinct articulation class in
/// the sequence and its target rule, deduplicated, for generator prompts.
std::string render_guidance_text(const PhonemeSequence& sequence, const PriorTable& table);

} // namespace speechshape
