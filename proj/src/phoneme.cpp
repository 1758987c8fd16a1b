#include "speechshape/phoneme.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "speechshape/text.hpp"

namespace speechshape {

using json = nlohmann::json;

const char* kSilenceSymbol = "sil";

Lang lang_from_string(const std::string& s) {
    if (s == "zh") return Lang::zh;
    if (s == "en") return Lang::en;
    throw Error("unknown language \"" + s + "\" (expected zh or en)");
}

std::string lang_to_string(Lang lang) { return lang == Lang::zh ? "zh" : "en"; }

std::string phoneme_class_name(PhonemeClass cls) {
    switch (cls) {
        case PhonemeClass::bilabial: return "bilabial";
        case PhonemeClass::labiodental: return "labiodental";
        case PhonemeClass::rounded_vowel: return "rounded_vowel";
        case PhonemeClass::open_vowel: return "open_vowel";
        case PhonemeClass::close_vowel: return "close_vowel";
        case PhonemeClass::alveolar: return "alveolar";
        case PhonemeClass::velar: return "velar";
        case PhonemeClass::other: return "other";
        case PhonemeClass::silence: return "silence";
    }
    return "other";
}

namespace {

PhonemeClass class_from_name(const std::string& name) {
    static const std::array<PhonemeClass, 9> all = {
        PhonemeClass::bilabial,     PhonemeClass::labiodental, PhonemeClass::rounded_vowel,
        PhonemeClass::open_vowel,   PhonemeClass::close_vowel, PhonemeClass::alveolar,
        PhonemeClass::velar,        PhonemeClass::other,       PhonemeClass::silence};
    for (auto cls : all)
        if (phoneme_class_name(cls) == name) return cls;
    throw Error("unknown phoneme class \"" + name + "\"");
}

const std::set<std::string> kEnVowels = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                         "EY", "IH", "IY", "OW", "OY", "UH", "UW"};

const std::map<std::string, PhonemeClass> kEnClasses = {
    {"B", PhonemeClass::bilabial},      {"P", PhonemeClass::bilabial},
    {"M", PhonemeClass::bilabial},      {"F", PhonemeClass::labiodental},
    {"V", PhonemeClass::labiodental},   {"AA", PhonemeClass::open_vowel},
    {"AE", PhonemeClass::open_vowel},   {"AW", PhonemeClass::open_vowel},
    {"AY", PhonemeClass::open_vowel},   {"AO", PhonemeClass::rounded_vowel},
    {"OW", PhonemeClass::rounded_vowel},{"OY", PhonemeClass::rounded_vowel},
    {"UH", PhonemeClass::rounded_vowel},{"UW", PhonemeClass::rounded_vowel},
    {"W", PhonemeClass::rounded_vowel}, {"IY", PhonemeClass::close_vowel},
    {"IH", PhonemeClass::close_vowel},  {"EH", PhonemeClass::close_vowel},
    {"EY", PhonemeClass::close_vowel},  {"AH", PhonemeClass::close_vowel},
    {"ER", PhonemeClass::close_vowel},  {"Y", PhonemeClass::close_vowel},
    {"T", PhonemeClass::alveolar},      {"D", PhonemeClass::alveolar},
    {"S", PhonemeClass::alveolar},      {"Z", PhonemeClass::alveolar},
    {"N", PhonemeClass::alveolar},      {"L", PhonemeClass::alveolar},
    {"R", PhonemeClass::alveolar},      {"CH", PhonemeClass::alveolar},
    {"JH", PhonemeClass::alveolar},     {"SH", PhonemeClass::alveolar},
    {"ZH", PhonemeClass::alveolar},     {"TH", PhonemeClass::alveolar},
    {"DH", PhonemeClass::alveolar},     {"K", PhonemeClass::velar},
    {"G", PhonemeClass::velar},         {"NG", PhonemeClass::velar},
    {"HH", PhonemeClass::other},
};

const std::map<std::string, PhonemeClass> kZhInitials = {
    {"b", PhonemeClass::bilabial},  {"p", PhonemeClass::bilabial},
    {"m", PhonemeClass::bilabial},  {"f", PhonemeClass::labiodental},
    {"d", PhonemeClass::alveolar},  {"t", PhonemeClass::alveolar},
    {"n", PhonemeClass::alveolar},  {"l", PhonemeClass::alveolar},
    {"z", PhonemeClass::alveolar},  {"c", PhonemeClass::alveolar},
    {"s", PhonemeClass::alveolar},  {"zh", PhonemeClass::alveolar},
    {"ch", PhonemeClass::alveolar}, {"sh", PhonemeClass::alveolar},
    {"r", PhonemeClass::alveolar},  {"j", PhonemeClass::alveolar},
    {"q", PhonemeClass::alveolar},  {"x", PhonemeClass::alveolar},
    {"g", PhonemeClass::velar},     {"k", PhonemeClass::velar},
    {"h", PhonemeClass::velar},     {"y", PhonemeClass::close_vowel},
    {"w", PhonemeClass::rounded_vowel},
};

const std::map<std::string, PhonemeClass> kZhFinals = {
    {"a", PhonemeClass::open_vowel},    {"ai", PhonemeClass::open_vowel},
    {"ao", PhonemeClass::open_vowel},   {"an", PhonemeClass::open_vowel},
    {"ang", PhonemeClass::open_vowel},  {"ia", PhonemeClass::open_vowel},
    {"iao", PhonemeClass::open_vowel},  {"ian", PhonemeClass::open_vowel},
    {"iang", PhonemeClass::open_vowel}, {"ua", PhonemeClass::open_vowel},
    {"uai", PhonemeClass::open_vowel},  {"uan", PhonemeClass::open_vowel},
    {"uang", PhonemeClass::open_vowel}, {"o", PhonemeClass::rounded_vowel},
    {"ou", PhonemeClass::rounded_vowel},{"ong", PhonemeClass::rounded_vowel},
    {"u", PhonemeClass::rounded_vowel}, {"uo", PhonemeClass::rounded_vowel},
    {"ui", PhonemeClass::rounded_vowel},{"un", PhonemeClass::rounded_vowel},
    {"v", PhonemeClass::rounded_vowel}, {"ve", PhonemeClass::rounded_vowel},
    {"van", PhonemeClass::rounded_vowel},{"vn", PhonemeClass::rounded_vowel},
    {"iu", PhonemeClass::rounded_vowel},{"iong", PhonemeClass::rounded_vowel},
    {"ueng", PhonemeClass::rounded_vowel},{"e", PhonemeClass::close_vowel},
    {"ei", PhonemeClass::close_vowel},  {"en", PhonemeClass::close_vowel},
    {"eng", PhonemeClass::close_vowel}, {"er", PhonemeClass::close_vowel},
    {"i", PhonemeClass::close_vowel},   {"ie", PhonemeClass::close_vowel},
    {"in", PhonemeClass::close_vowel},  {"ing", PhonemeClass::close_vowel},
};

bool is_silence_symbol(const std::string& s) {
    return s == "sil" || s == "sp" || s == "spn" || s.empty();
}

std::string to_upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string format2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

Phoneme make_phoneme(const std::string& symbol, Lang lang) {
    if (is_silence_symbol(symbol))
        return Phoneme{kSilenceSymbol, lang, PhonemeClass::silence, std::nullopt};

    if (lang == Lang::en) {
        std::string s = to_upper(symbol);
        std::optional<int> stress;
        if (!s.empty() && s.back() >= '0' && s.back() <= '2') {
            stress = s.back() - '0';
            s.pop_back();
        }
        auto it = kEnClasses.find(s);
        if (it == kEnClasses.end())
            throw Error("unknown ARPAbet symbol \"" + symbol + "\"");
        bool vowel = kEnVowels.count(s) > 0;
        if (stress && !vowel)
            throw Error("stress marker on non-vowel symbol \"" + symbol + "\"");
        std::string canonical = s + (stress ? std::string(1, char('0' + *stress)) : "");
        return Phoneme{canonical, lang, it->second, stress};
    }

    std::string s = to_lower(symbol);
    std::optional<int> tone;
    if (!s.empty() && s.back() >= '1' && s.back() <= '5') {
        tone = s.back() - '0';
        s.pop_back();
    }
    if (auto it = kZhFinals.find(s); it != kZhFinals.end()) {
        std::string canonical = s + (tone ? std::string(1, char('0' + *tone)) : "");
        return Phoneme{canonical, lang, it->second, tone};
    }
    if (!tone) {
        if (auto it = kZhInitials.find(s); it != kZhInitials.end())
            return Phoneme{s, lang, it->second, std::nullopt};
    }
    throw Error("unknown pinyin symbol \"" + symbol + "\"");
}

bool is_known_symbol(const std::string& symbol, Lang lang) {
    try {
        make_phoneme(symbol, lang);
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::vector<std::string> inventory_symbols(Lang lang) {
    std::vector<std::string> out;
    if (lang == Lang::en) {
        for (const auto& [sym, cls] : kEnClasses) { out.push_back(sym); (void)cls; }
    } else {
        for (const auto& [sym, cls] : kZhInitials) { out.push_back(sym); (void)cls; }
        for (const auto& [sym, cls] : kZhFinals) { out.push_back(sym); (void)cls; }
    }
    out.push_back(kSilenceSymbol);
    return out;
}

bool PhonemeSequence::all_silence() const {
    return std::all_of(items.begin(), items.end(),
                       [](const Phoneme& p) { return p.cls == PhonemeClass::silence; });
}

Lexicon Lexicon::from_text(const std::string& text) {
    Lexicon lex;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("lexicon line " + std::to_string(lineno) + " has no tab separator");
        std::string word = to_lower(line.substr(0, tab));
        std::vector<std::string> syms;
        std::istringstream rest(line.substr(tab + 1));
        std::string sym;
        while (rest >> sym) syms.push_back(sym);
        if (word.empty() || syms.empty())
            throw Error("lexicon line " + std::to_string(lineno) + " is incomplete");
        lex.entries_[word] = std::move(syms);
        lex.max_key_cps_ = std::max(lex.max_key_cps_, utf8_decode(word).size());
    }
    return lex;
}

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open lexicon file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

const std::vector<std::string>* Lexicon::find(const std::string& word) const {
    auto it = entries_.find(to_lower(word));
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> pinyin_decompose(const std::string& syllable) {
    std::string s = to_lower(syllable);
    if (s.empty()) return {};
    int tone = 1; // bare syllables default to the first tone
    if (s.back() >= '0' && s.back() <= '9') {
        int d = s.back() - '0';
        if (d < 1 || d > 5) return {};
        tone = d;
        s.pop_back();
    }
    if (s.empty()) return {};

    auto final_with_tone = [&](const std::string& f) { return f + char('0' + tone); };

    for (const auto& prefix : {std::string("zh"), std::string("ch"), std::string("sh")}) {
        if (s.rfind(prefix, 0) == 0 && kZhFinals.count(s.substr(prefix.size())))
            return {prefix, final_with_tone(s.substr(prefix.size()))};
    }
    if (s.size() >= 2 && kZhInitials.count(s.substr(0, 1)) &&
        kZhFinals.count(s.substr(1)))
        return {s.substr(0, 1), final_with_tone(s.substr(1))};
    if (kZhFinals.count(s)) return {final_with_tone(s)};
    return {};
}

namespace {

struct WordToken {
    std::string core;        // lexical content, punctuation stripped
    bool sentence_final = false;
};

std::vector<WordToken> split_words(const std::string& text) {
    std::vector<WordToken> out;
    auto cps = utf8_decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_space_cp(cps[i])) ++i;
        if (i >= cps.size()) break;
        std::vector<std::uint32_t> core;
        bool final_punct = false;
        while (i < cps.size() && !is_space_cp(cps[i])) {
            if (is_punct_cp(cps[i])) {
                if (is_sentence_final_cp(cps[i])) final_punct = true;
            } else {
                core.push_back(cps[i]);
            }
            ++i;
        }
        out.push_back({utf8_encode(core), final_punct});
    }
    return out;
}

void append_symbols(PhonemeSequence& seq, const std::vector<std::string>& syms, Lang lang) {
    for (const auto& s : syms) seq.items.push_back(make_phoneme(s, lang));
}

/// Greedy longest-match segmentation for unspaced text (hanzi words).
void phonemize_unspaced(PhonemeSequence& seq, const std::string& text, const Lexicon& lexicon) {
    auto cps = utf8_decode(text);
    bool pending_sil = false;
    std::size_t i = 0;
    while (i < cps.size()) {
        if (is_space_cp(cps[i]) || is_punct_cp(cps[i])) {
            if (is_sentence_final_cp(cps[i]) && !seq.items.empty()) pending_sil = true;
            ++i;
            continue;
        }
        std::size_t best = 0;
        const std::vector<std::string>* best_syms = nullptr;
        std::size_t limit = std::min(cps.size() - i, lexicon.max_key_codepoints());
        for (std::size_t len = limit; len >= 1; --len) {
            std::string candidate;
            for (std::size_t k = 0; k < len; ++k) candidate += utf8_encode_one(cps[i + k]);
            if (const auto* syms = lexicon.find(candidate)) {
                best = len;
                best_syms = syms;
                break;
            }
        }
        if (!best_syms) throw OutOfVocabularyError(utf8_encode_one(cps[i]));
        if (pending_sil) {
            seq.items.push_back(make_phoneme(kSilenceSymbol, seq.language));
            pending_sil = false;
        }
        append_symbols(seq, *best_syms, seq.language);
        i += best;
    }
}

} // namespace

PhonemeSequence phonemize(const std::string& text, Lang lang, const Lexicon& lexicon) {
    PhonemeSequence seq;
    seq.language = lang;

    bool has_space = std::any_of(text.begin(), text.end(),
                                 [](char c) { return c == ' ' || c == '\t' || c == '\n'; });
    bool all_ascii = std::all_of(text.begin(), text.end(),
                                 [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    if (lang == Lang::zh && !has_space && !all_ascii) {
        phonemize_unspaced(seq, text, lexicon);
        return seq;
    }

    bool pending_sil = false;
    for (const auto& word : split_words(text)) {
        if (word.core.empty()) {
            if (word.sentence_final && !seq.items.empty()) pending_sil = true;
            continue;
        }
        if (pending_sil) {
            seq.items.push_back(make_phoneme(kSilenceSymbol, lang));
            pending_sil = false;
        }
        if (const auto* syms = lexicon.find(word.core)) {
            append_symbols(seq, *syms, lang);
        } else if (lang == Lang::zh) {
            auto syms = pinyin_decompose(word.core);
            if (syms.empty()) throw OutOfVocabularyError(word.core);
            append_symbols(seq, syms, lang);
        } else {
            throw OutOfVocabularyError(word.core);
        }
        if (word.sentence_final) pending_sil = true;
    }
    return seq;
}

PriorTable PriorTable::from_json_text(const std::string& text, const ChannelSchema& schema) {
    json j = json::parse(text);
    if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array())
        throw Error("prior table must be an object with a \"rows\" array");

    PriorTable table;
    table.schema_ = schema;
    for (const auto& row : j["rows"]) {
        Row r;
        if (row.contains("dominance")) r.prior.dominance = row["dominance"].get<double>();
        if (row.contains("nominal_duration"))
            r.prior.nominal_duration = row["nominal_duration"].get<double>();
        if (row.contains("stress_gain")) r.stress_gain = row["stress_gain"].get<double>();
        if (r.prior.dominance <= 0.0) throw Error("prior table dominance must be > 0");
        if (r.prior.nominal_duration <= 0.0)
            throw Error("prior table nominal_duration must be > 0");
        if (row.contains("targets")) {
            for (const auto& [channel, value] : row["targets"].items()) {
                if (!schema.has(channel))
                    throw Error("prior table targets unknown channel \"" + channel + "\"");
                double v = value.get<double>();
                if (v < 0.0 || v > 1.0)
                    throw Error("prior table target for \"" + channel + "\" outside [0,1]");
                r.prior.targets[channel] = v;
            }
        }
        if (row.contains("class")) {
            table.class_rows_[class_from_name(row["class"].get<std::string>())] = r;
        } else if (row.contains("symbol")) {
            table.symbol_rows_[row["symbol"].get<std::string>()] = r;
        } else {
            throw Error("prior table row needs a \"class\" or \"symbol\" key");
        }
    }
    static const std::array<PhonemeClass, 9> all = {
        PhonemeClass::bilabial,     PhonemeClass::labiodental, PhonemeClass::rounded_vowel,
        PhonemeClass::open_vowel,   PhonemeClass::close_vowel, PhonemeClass::alveolar,
        PhonemeClass::velar,        PhonemeClass::other,       PhonemeClass::silence};
    for (auto cls : all)
        if (!table.class_rows_.count(cls))
            throw Error("prior table missing row for class \"" + phoneme_class_name(cls) + "\"");
    return table;
}

PriorTable PriorTable::load(const std::string& path, const ChannelSchema& schema) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open prior table: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str(), schema);
}

ArticulationPrior PriorTable::prior_for(const Phoneme& phoneme) const {
    const Row* row = nullptr;
    if (auto it = symbol_rows_.find(phoneme.symbol); it != symbol_rows_.end()) {
        row = &it->second;
    } else {
        std::string base = phoneme.symbol;
        while (!base.empty() && base.back() >= '0' && base.back() <= '9') base.pop_back();
        if (auto it2 = symbol_rows_.find(base); it2 != symbol_rows_.end()) row = &it2->second;
    }
    if (!row) row = &class_rows_.at(phoneme.cls);

    ArticulationPrior prior = row->prior;
    bool primary_stress = phoneme.language == Lang::en && phoneme.stress_or_tone == 1;
    if (primary_stress && row->stress_gain != 1.0) {
        for (auto& [channel, value] : prior.targets)
            value = std::min(1.0, value * row->stress_gain);
    }
    return prior;
}

ArticulationPrior articulation_prior(const std::string& symbol, Lang lang,
                                     const PriorTable& table) {
    return table.prior_for(make_phoneme(symbol, lang));
}

std::string render_guidance_text(const PhonemeSequence& sequence, const PriorTable& table) {
    static const std::array<std::pair<PhonemeClass, const char*>, 9> blurbs = {{
        {PhonemeClass::bilabial, "full lip closure"},
        {PhonemeClass::labiodental, "lower lip raised to the upper teeth"},
        {PhonemeClass::rounded_vowel, "rounded, protruded lips"},
        {PhonemeClass::open_vowel, "larger jaw opening"},
        {PhonemeClass::close_vowel, "narrow jaw with spread lips"},
        {PhonemeClass::alveolar, "tongue to the alveolar ridge, slight jaw opening"},
        {PhonemeClass::velar, "back-of-tongue closure, slight jaw opening"},
        {PhonemeClass::other, "neutral articulation"},
        {PhonemeClass::silence, "rest pose, all channels at zero"},
    }};

    std::map<PhonemeClass, std::vector<std::string>> symbols_by_class;
    for (const auto& p : sequence.items) {
        auto& syms = symbols_by_class[p.cls];
        if (std::find(syms.begin(), syms.end(), p.symbol) == syms.end())
            syms.push_back(p.symbol);
    }

    std::string out = "Articulation guidance:\n";
    for (const auto& [cls, blurb] : blurbs) {
        auto it = symbols_by_class.find(cls);
        if (it == symbols_by_class.end()) continue;
        out += "- " + phoneme_class_name(cls) + " (";
        for (std::size_t i = 0; i < it->second.size(); ++i) {
            if (i) out += ", ";
            out += it->second[i];
        }
        out += "): " + std::string(blurb);
        const auto prior = table.prior_for(Phoneme{"", sequence.language, cls, std::nullopt});
        if (!prior.targets.empty()) {
            out += "; targets:";
            bool first = true;
            for (const auto& [channel, value] : prior.targets) {
                out += first ? " " : ", ";
                out += channel + " " + format2(value);
                first = false;
            }
        }
        out += ".\n";
    }
    return out;
}

} // namespace speechshape
