#include "speechshape/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "speechshape/text.hpp"

namespace speechshape {

using json = nlohmann::json;

TimedTranscript TimedTranscript::from_json_text(const std::string& text) {
    json j = json::parse(text);
    if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array())
        throw Error("transcript must be an object with a \"tokens\" array");
    TimedTranscript out;
    out.language = lang_from_string(j.value("language", "en"));
    for (const auto& t : j["tokens"]) {
        TimedToken tok;
        tok.text = t.at("text").get<std::string>();
        tok.start = t.at("start").get<double>();
        tok.end = t.at("end").get<double>();
        out.tokens.push_back(std::move(tok));
    }
    out.validate();
    return out;
}

TimedTranscript TimedTranscript::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open transcript: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

void TimedTranscript::validate() const {
    double prev_start = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.start < 0.0 || t.end < t.start)
            throw Error("token " + std::to_string(i) + " has an invalid time span");
        if (i > 0 && t.start < prev_start)
            throw Error("token " + std::to_string(i) + " starts before its predecessor");
        prev_start = t.start;
    }
}

std::string TimedTranscript::text() const { return text(0, tokens.size()); }

std::string TimedTranscript::text(std::size_t begin, std::size_t end) const {
    std::string out;
    for (std::size_t i = begin; i < end && i < tokens.size(); ++i) {
        if (i > begin) out.push_back(' ');
        out += tokens[i].text;
    }
    return out;
}

PhonemeAnnotations PhonemeAnnotations::from_json_text(const std::string& text, Lang lang) {
    json j = json::parse(text);
    if (!j.is_array()) throw Error("phoneme annotations must be a JSON array");
    PhonemeAnnotations out;
    out.language = lang;
    for (const auto& e : j) {
        PhonemeAnnotation a;
        a.symbol = e.at("symbol").get<std::string>();
        if (e.contains("start")) a.start = e["start"].get<double>();
        if (e.contains("end")) a.end = e["end"].get<double>();
        out.items.push_back(std::move(a));
    }
    return out;
}

PhonemeAnnotations PhonemeAnnotations::load(const std::string& path, Lang lang) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open phoneme annotations: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str(), lang);
}

namespace {

bool token_ends_sentence(const std::string& text) {
    auto cps = utf8_decode(text);
    for (auto it = cps.rbegin(); it != cps.rend(); ++it) {
        if (is_sentence_final_cp(*it)) return true;
        if (!is_punct_cp(*it)) return false; // stop at lexical content
    }
    return false;
}

bool token_ends_clause(const std::string& text) {
    auto cps = utf8_decode(text);
    if (cps.empty()) return false;
    return is_clause_comma_cp(cps.back());
}

void split_run(const TimedTranscript& transcript, std::size_t begin, std::size_t end,
               std::size_t max_tokens, std::vector<TokenRange>& out) {
    std::size_t len = end - begin;
    if (len <= max_tokens) {
        out.push_back({begin, end});
        return;
    }
    // clause comma nearest the midpoint; the comma token stays on the left
    double half = static_cast<double>(len) / 2.0;
    std::size_t best = end;
    double best_dist = 0.0;
    for (std::size_t i = begin; i + 1 < end; ++i) {
        if (!token_ends_clause(transcript.tokens[i].text)) continue;
        double left_size = static_cast<double>(i - begin + 1);
        double dist = std::abs(left_size - half);
        if (best == end || dist < best_dist) {
            best = i;
            best_dist = dist;
        }
    }
    std::size_t split = best != end ? best + 1 : begin + (len + 1) / 2;
    split_run(transcript, begin, split, max_tokens, out);
    split_run(transcript, split, end, max_tokens, out);
}

} // namespace

std::vector<std::string> naive_semantic_split(const TimedTranscript& transcript,
                                              std::size_t max_tokens) {
    if (max_tokens == 0) throw Error("max_tokens must be >= 1");
    std::vector<TokenRange> runs;
    std::size_t start = 0;
    for (std::size_t i = 0; i < transcript.tokens.size(); ++i) {
        if (token_ends_sentence(transcript.tokens[i].text)) {
            runs.push_back({start, i + 1});
            start = i + 1;
        }
    }
    if (start < transcript.tokens.size()) runs.push_back({start, transcript.tokens.size()});

    std::vector<TokenRange> ranges;
    for (const auto& run : runs)
        split_run(transcript, run.begin, run.end, max_tokens, ranges);

    std::vector<std::string> texts;
    for (const auto& r : ranges) texts.push_back(transcript.text(r.begin, r.end));
    return texts;
}

TokenRange locate_token_span(const std::string& segment_text,
                             const TimedTranscript& transcript, std::size_t cursor) {
    std::string target = normalize_for_match(segment_text);
    if (target.empty())
        throw NoMatchError("segment has no lexical content: \"" + segment_text + "\"");
    const auto& tokens = transcript.tokens;
    for (std::size_t s = cursor; s < tokens.size(); ++s) {
        std::string acc;
        for (std::size_t j = s; j < tokens.size(); ++j) {
            acc += normalize_for_match(tokens[j].text);
            if (acc.size() > target.size()) break;
            if (target.compare(0, acc.size(), acc) != 0) break;
            if (acc.size() == target.size()) return {s, j + 1};
        }
    }
    throw NoMatchError("segment \"" + segment_text + "\" not found at or after token " +
                       std::to_string(cursor));
}

TimeSpan recover_time_span(const TokenRange& range, const TimedTranscript& transcript,
                           double pad) {
    if (range.begin >= range.end || range.end > transcript.tokens.size())
        throw SpanError("invalid token range");
    return {std::max(0.0, transcript.tokens[range.begin].start - pad),
            transcript.tokens[range.end - 1].end + pad};
}

long long frame_floor(double seconds, double fps) {
    return static_cast<long long>(std::floor(seconds * fps + 1e-9));
}

long long frame_ceil(double seconds, double fps) {
    return static_cast<long long>(std::ceil(seconds * fps - 1e-9));
}

std::pair<std::size_t, std::size_t> frame_range_for_span(const TimeSpan& span, double fps,
                                                         std::size_t total_frames) {
    long long f0 = std::max(0LL, frame_floor(span.start, fps));
    long long f1 = std::max(f0, frame_ceil(span.end, fps));
    auto t = static_cast<long long>(total_frames);
    return {static_cast<std::size_t>(std::min(f0, t)), static_cast<std::size_t>(std::min(f1, t))};
}

BlendshapeSequence slice_coefficients(const BlendshapeSequence& full, const TimeSpan& span) {
    double duration = static_cast<double>(full.frames) / full.fps;
    if (span.start < -1e-9 || span.end < span.start || span.start > duration + 1e-6 ||
        span.end > duration + 1e-6)
        throw SpanError("span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                        ") outside recording duration " + std::to_string(duration));
    auto [f0, f1] = frame_range_for_span(span, full.fps, full.frames);
    BlendshapeSequence out = BlendshapeSequence::zeros(full.schema, full.fps, f1 - f0);
    std::copy(full.values.begin() + static_cast<std::ptrdiff_t>(f0 * full.channels()),
              full.values.begin() + static_cast<std::ptrdiff_t>(f1 * full.channels()),
              out.values.begin());
    return out;
}

namespace {

PhonemeSequence resolve_phonemes(const PhonemeSource& source, Lang lang,
                                 const std::string& text, const TimeSpan& span) {
    if (source.annotations) {
        PhonemeSequence seq;
        seq.language = lang;
        for (const auto& item : source.annotations->items) {
            if (!item.start || !item.end) continue; // untimed rows cannot be assigned
            double mid = 0.5 * (*item.start + *item.end);
            if (mid < span.start || mid >= span.end) continue;
            seq.items.push_back(make_phoneme(item.symbol, lang));
            seq.spans.push_back({*item.start - span.start, *item.end - span.start});
        }
        if (!seq.items.empty()) return seq;
        // nothing annotated inside the span; fall back to the lexicon
    }
    if (source.lexicon) return phonemize(text, lang, *source.lexicon);
    throw Error("no phoneme source available for segment \"" + text + "\"");
}

} // namespace

BuildResult build_units(const TimedTranscript& transcript,
                        const std::vector<std::string>& segment_texts,
                        const PhonemeSource& phonemes, const BlendshapeSequence& coefficients,
                        const BuildConfig& config) {
    BuildResult result;
    if (segment_texts.empty()) return result;

    std::size_t cursor = 0;
    for (std::size_t idx = 0; idx < segment_texts.size(); ++idx) {
        const auto& text = segment_texts[idx];
        try {
            TokenRange range = locate_token_span(text, transcript, cursor);
            TimeSpan token_span = recover_time_span(range, transcript, 0.0);
            TimeSpan padded = recover_time_span(range, transcript, config.pad);
            auto [f0, f1] = frame_range_for_span(padded, coefficients.fps, coefficients.frames);

            AlignedUnit unit;
            unit.segment = {text, range, token_span};
            unit.audio_span = padded;
            unit.coefficients = slice_coefficients(coefficients, padded);
            unit.phonemes = resolve_phonemes(phonemes, transcript.language, text, padded);
            unit.source_id = config.source_id;
            unit.frame_begin = f0;
            unit.frame_end = f1;
            if (!normalize_for_match(text).empty() && unit.phonemes.items.empty())
                throw Error("no phonemes resolved for lexical segment");

            cursor = range.end;
            result.units.push_back(std::move(unit));
        } catch (const Error& e) {
            result.drops.push_back({idx, text, e.what()});
        }
    }

    if (result.drops.size() * 2 > segment_texts.size()) {
        std::string msg = std::to_string(result.drops.size()) + " of " +
                          std::to_string(segment_texts.size()) +
                          " segments failed to align:";
        for (const auto& d : result.drops) msg += "\n  [" + std::to_string(d.index) + "] " + d.reason;
        throw AggregateAlignmentError(msg);
    }
    return result;
}

} // namespace speechshape
