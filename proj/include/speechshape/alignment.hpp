#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "speechshape/blendshape.hpp"
#include "speechshape/errors.hpp"
#include "speechshape/phoneme.hpp"

namespace speechshape {

struct TimedToken {
    std::string text;
    double start = 0.0;
    double end = 0.0;
};

/// ASR output: ordered tokens with timestamps. Tokens join with single
/// spaces to form the transcript text.
struct TimedTranscript {
    Lang language = Lang::en;
    std::vector<TimedToken> tokens;

    static TimedTranscript from_json_text(const std::string& text);
    static TimedTranscript load(const std::string& path);

    std::string text() const;
    std::string text(std::size_t begin, std::size_t end) const;
    void validate() const;
};

/// Half-open token index interval [begin, end).
struct TokenRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool operator==(const TokenRange&) const = default;
};

struct TranscriptSegment {
    std::string text;
    TokenRange tokens;
    TimeSpan span; // unpadded token boundary times
};

/// External phoneme annotation entry ({symbol, start?, end?} JSON rows).
struct PhonemeAnnotation {
    std::string symbol;
    std::optional<double> start;
    std::optional<double> end;
};

struct PhonemeAnnotations {
    Lang language = Lang::en;
    std::vector<PhonemeAnnotation> items;

    static PhonemeAnnotations from_json_text(const std::string& text, Lang lang);
    static PhonemeAnnotations load(const std::string& path, Lang lang);
};

/// Where a unit's phonemes come from: timed annotations when available,
/// otherwise lexicon-based phonemization of the segment text.
struct PhonemeSource {
    const Lexicon* lexicon = nullptr;
    std::optional<PhonemeAnnotations> annotations;
};

/// Stage-up output: one temporally consistent audio/text/phoneme/coefficient
/// tuple per transcript segment.
struct AlignedUnit {
    TranscriptSegment segment;
    TimeSpan audio_span; // padded span used for audio and coefficient slicing
    PhonemeSequence phonemes;
    BlendshapeSequence coefficients;
    std::string source_id;
    std::size_t frame_begin = 0;
    std::size_t frame_end = 0;
};

struct BuildConfig {
    std::string source_id;
    double pad = 0.0; // seconds added on both sides of each span
};

struct DroppedSegment {
    std::size_t index = 0;
    std::string text;
    std::string reason;
};

struct BuildResult {
    std::vector<AlignedUnit> units;
    std::vector<DroppedSegment> drops;
};

/// Fallback splitter: cut at sentence-final punctuation, then split runs
/// longer than max_tokens at the clause comma nearest the midpoint (hard
/// midpoint split when no comma exists). Token coverage is exact.
std::vector<std::string> naive_semantic_split(const TimedTranscript& transcript,
                                              std::size_t max_tokens);

/// Leftmost token interval at or after `cursor` whose normalized
/// concatenation equals the normalized segment text. Exact match only.
TokenRange locate_token_span(const std::string& segment_text,
                             const TimedTranscript& transcript, std::size_t cursor);

TimeSpan recover_time_span(const TokenRange& range, const TimedTranscript& transcript,
                           double pad);

/// Frame index mapping with a 1e-9 guard against floating-point spill:
/// floor(start*fps) inclusive, ceil(end*fps) exclusive.
long long frame_floor(double seconds, double fps);
long long frame_ceil(double seconds, double fps);

/// Frames [floor(start*fps), ceil(end*fps)) clamped to [0, T).
std::pair<std::size_t, std::size_t> frame_range_for_span(const TimeSpan& span, double fps,
                                                         std::size_t total_frames);

BlendshapeSequence slice_coefficients(const BlendshapeSequence& full, const TimeSpan& span);

/// Stage I loop: locate each segment, recover its span, slice coefficients,
/// resolve phonemes. Unalignable segments are dropped with a reason; more
/// than 50% drops raises AggregateAlignmentError.
BuildResult build_units(const TimedTranscript& transcript,
                        const std::vector<std::string>& segment_texts,
                        const PhonemeSource& phonemes, const BlendshapeSequence& coefficients,
                        const BuildConfig& config);

} // namespace speechshape
