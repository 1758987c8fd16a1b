#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "speechshape/alignment.hpp"
#include "speechshape/wav.hpp"

using namespace speechshape;

namespace {

TimedTranscript make_transcript(const std::vector<std::string>& words, double token_dur = 0.3,
                                Lang lang = Lang::en) {
    TimedTranscript t;
    t.language = lang;
    double clock = 0.0;
    for (const auto& w : words) {
        t.tokens.push_back({w, clock, clock + token_dur});
        clock += token_dur;
    }
    return t;
}

Lexicon en_lexicon() {
    return Lexicon::load(std::string(SPEECHSHAPE_DATA_DIR) + "/lexicon_en.txt");
}

} // namespace

TEST_CASE("transcript parsing and validation") {
    auto t = TimedTranscript::from_json_text(
        R"({"language":"en","tokens":[{"text":"hi","start":0.0,"end":0.4},{"text":"there","start":0.4,"end":0.9}]})");
    CHECK(t.tokens.size() == 2);
    CHECK(t.text() == "hi there");
    CHECK_THROWS_AS(TimedTranscript::from_json_text(
                        R"({"tokens":[{"text":"x","start":1.0,"end":0.5}]})"),
                    Error); // end before start
    CHECK_THROWS_AS(TimedTranscript::from_json_text(
                        R"({"tokens":[{"text":"a","start":1.0,"end":1.2},{"text":"b","start":0.5,"end":0.8}]})"),
                    Error); // decreasing starts
}

TEST_CASE("naive semantic split") {
    SUBCASE("sentence punctuation") {
        auto t = make_transcript({"hello", "world.", "how", "are", "you"});
        auto segs = naive_semantic_split(t, 24);
        REQUIRE(segs.size() == 2);
        CHECK(segs[0] == "hello world.");
        CHECK(segs[1] == "how are you");
    }
    SUBCASE("single token") {
        auto t = make_transcript({"hello"});
        CHECK(naive_semantic_split(t, 24) == std::vector<std::string>{"hello"});
    }
    SUBCASE("double max_tokens with no punctuation splits at the midpoint") {
        std::vector<std::string> words(16, "word");
        auto t = make_transcript(words);
        auto segs = naive_semantic_split(t, 8);
        REQUIRE(segs.size() == 2);
        CHECK(segs[0] == segs[1]);
    }
    SUBCASE("comma nearest the midpoint wins") {
        auto t = make_transcript({"a", "b,", "c", "d", "e", "f,", "g", "h", "i", "j"});
        auto segs = naive_semantic_split(t, 6);
        REQUIRE(segs.size() == 2);
        CHECK(segs[0] == "a b, c d e f,"); // comma at index 5, left size 6 vs half 5
        CHECK(segs[1] == "g h i j");
    }
    SUBCASE("token coverage is exact") {
        std::mt19937_64 rng(77);
        std::vector<std::string> pool = {"one", "two", "three,", "four.", "five", "six!"};
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<std::string> words;
            std::size_t n = 1 + rng() % 40;
            for (std::size_t i = 0; i < n; ++i) words.push_back(pool[rng() % pool.size()]);
            auto t = make_transcript(words);
            auto segs = naive_semantic_split(t, 2 + rng() % 8);
            std::string joined;
            for (std::size_t i = 0; i < segs.size(); ++i) {
                if (i) joined.push_back(' ');
                joined += segs[i];
            }
            REQUIRE(joined == t.text());
        }
    }
}

TEST_CASE("locate token span") {
    SUBCASE("simple match") {
        auto t = make_transcript({"hello", "world"});
        CHECK(locate_token_span("hello world", t, 0) == TokenRange{0, 2});
    }
    SUBCASE("leftmost at or after cursor") {
        auto t = make_transcript({"a", "b", "a", "b"});
        CHECK(locate_token_span("a b", t, 0) == TokenRange{0, 2});
        CHECK(locate_token_span("a b", t, 2) == TokenRange{2, 4});
    }
    SUBCASE("no match") {
        auto t = make_transcript({"hello", "world"});
        CHECK_THROWS_AS(locate_token_span("xyz", t, 0), NoMatchError);
        CHECK_THROWS_AS(locate_token_span("hello world", t, 1), NoMatchError);
    }
    SUBCASE("normalization bridges surface forms") {
        auto t = make_transcript({"Hello,", "WORLD!"});
        CHECK(locate_token_span("hello world", t, 0) == TokenRange{0, 2});
    }
    SUBCASE("punctuation-only segment is rejected") {
        auto t = make_transcript({"hello"});
        CHECK_THROWS_AS(locate_token_span("...", t, 0), NoMatchError);
    }
}

TEST_CASE("recover time span") {
    TimedTranscript t;
    t.language = Lang::en;
    t.tokens = {{"hello", 0.0, 0.4}, {"world", 0.5, 0.9}};

    auto s1 = recover_time_span({1, 2}, t, 0.0);
    CHECK(s1.start == doctest::Approx(0.5));
    CHECK(s1.end == doctest::Approx(0.9));

    auto s2 = recover_time_span({1, 2}, t, 0.1);
    CHECK(s2.start == doctest::Approx(0.4));
    CHECK(s2.end == doctest::Approx(1.0));

    auto s3 = recover_time_span({0, 1}, t, 0.1);
    CHECK(s3.start == 0.0); // clamped
    CHECK(s3.end == doctest::Approx(0.5));
}

TEST_CASE("slice coefficients") {
    auto schema = testutil::two_channel_schema();
    std::mt19937_64 rng(12);
    auto full = testutil::random_sequence(schema, 60, rng); // 2 seconds at 30 fps

    SUBCASE("floor/ceil frame mapping") {
        auto out = slice_coefficients(full, {0.5, 0.9});
        REQUIRE(out.frames == 12); // frames [15, 27)
        for (std::size_t t = 0; t < 12; ++t)
            for (std::size_t k = 0; k < 2; ++k) CHECK(out.at(t, k) == full.at(15 + t, k));
    }
    SUBCASE("frame boundary arithmetic resists float spill") {
        CHECK(frame_floor(0.5, 30.0) == 15);
        CHECK(frame_ceil(0.9, 30.0) == 27); // 0.9*30 = 27.000000000000004
        CHECK(frame_ceil(0.1 + 0.2, 30.0) == 9);
    }
    SUBCASE("identity slice") {
        auto out = slice_coefficients(full, {0.0, 2.0});
        CHECK(out.values == full.values);
    }
    SUBCASE("degenerate span is empty") {
        CHECK(slice_coefficients(full, {0.5, 0.5}).frames == 0);
    }
    SUBCASE("span outside duration") {
        CHECK_THROWS_AS(slice_coefficients(full, {1.5, 2.5}), SpanError);
        CHECK_THROWS_AS(slice_coefficients(full, {-0.5, 0.5}), SpanError);
    }
}

TEST_CASE("slice audio") {
    WavData wav;
    wav.sample_rate = 16000;
    wav.channels = 1;
    wav.samples.resize(16000); // 1 second
    for (std::size_t i = 0; i < wav.samples.size(); ++i)
        wav.samples[i] = static_cast<std::int16_t>(1000.0 * std::sin(0.01 * static_cast<double>(i)));
    auto bytes = write_wav(wav);

    SUBCASE("identity slice preserves the payload") {
        auto sliced = read_wav(slice_audio(bytes, 0.0, 1.0));
        CHECK(sliced.samples == wav.samples);
        CHECK(sliced.sample_rate == 16000);
    }
    SUBCASE("0.4 s at 16 kHz is 6400 samples") {
        auto sliced = read_wav(slice_audio(bytes, 0.5, 0.9));
        CHECK(sliced.samples.size() == 6400);
        CHECK(sliced.samples[0] == wav.samples[8000]);
    }
    SUBCASE("stereo header preserved") {
        WavData st;
        st.sample_rate = 8000;
        st.channels = 2;
        st.samples.resize(8000 * 2, 17);
        auto out = read_wav(slice_audio(write_wav(st), 0.25, 0.5));
        CHECK(out.channels == 2);
        CHECK(out.sample_rate == 8000);
        CHECK(out.frame_count() == 2000);
    }
    SUBCASE("non-PCM encoding rejected") {
        auto bad = bytes;
        bad[20] = 3; // format tag -> IEEE float
        CHECK_THROWS_AS(slice_audio(bad, 0.0, 0.5), UnsupportedEncodingError);
    }
    SUBCASE("span outside duration") {
        CHECK_THROWS_AS(slice_audio(bytes, 0.5, 1.5), SpanError);
    }
}

TEST_CASE("build units") {
    auto lex = en_lexicon();
    PhonemeSource source;
    source.lexicon = &lex;
    auto schema = testutil::two_channel_schema();

    SUBCASE("two-segment fixture covers the sliced frame range") {
        auto t = make_transcript({"hello", "world.", "how", "are", "you"}, 0.25);
        std::mt19937_64 rng(3);
        auto coeffs = testutil::random_sequence(schema, 45, rng); // 1.5 s
        auto segs = naive_semantic_split(t, 24);
        auto result = build_units(t, segs, source, coeffs, {"rec", 0.0});
        REQUIRE(result.units.size() == 2);
        CHECK(result.drops.empty());

        const auto& u0 = result.units[0];
        const auto& u1 = result.units[1];
        CHECK(u0.segment.tokens == TokenRange{0, 2});
        CHECK(u1.segment.tokens == TokenRange{2, 5});
        // spans: [0, 0.5) and [0.5, 1.25) at 30 fps -> frames [0,15) and [15,38)
        CHECK(u0.frame_begin == 0);
        CHECK(u0.frame_end == 15);
        CHECK(u1.frame_begin == 15);
        CHECK(u1.frame_end == 38);
        CHECK(u0.coefficients.frames == 15);
        CHECK(u1.coefficients.frames == 23);
        CHECK_FALSE(u0.phonemes.items.empty());
        // frame-count invariant: within one frame of round(len * fps)
        for (const auto& u : result.units) {
            double expect = (u.audio_span.end - u.audio_span.start) * coeffs.fps;
            CHECK(std::abs(static_cast<double>(u.frame_end - u.frame_begin) - expect) <= 1.0 + 1e-9);
        }
    }
    SUBCASE("empty transcript yields empty unit list") {
        TimedTranscript t;
        auto coeffs = BlendshapeSequence::zeros(schema, 30.0, 0);
        auto result = build_units(t, {}, source, coeffs, {"rec", 0.0});
        CHECK(result.units.empty());
        CHECK(result.drops.empty());
    }
    SUBCASE("failed segments are dropped with a reason") {
        auto t = make_transcript({"hello", "world"}, 0.25);
        std::mt19937_64 rng(4);
        auto coeffs = testutil::random_sequence(schema, 15, rng);
        auto result = build_units(t, {"hello", "missing"}, source, coeffs, {"rec", 0.0});
        CHECK(result.units.size() == 1);
        REQUIRE(result.drops.size() == 1);
        CHECK(result.drops[0].index == 1);
        CHECK_FALSE(result.drops[0].reason.empty());
    }
    SUBCASE("aggregate error above 50% failures") {
        auto t = make_transcript({"hello", "world", "you"}, 0.2);
        std::mt19937_64 rng(5);
        auto coeffs = testutil::random_sequence(schema, 18, rng);
        CHECK_THROWS_AS(build_units(t, {"hello", "nope1", "nope2"}, source, coeffs, {"rec", 0.0}),
                        AggregateAlignmentError);
        // exactly 50% is tolerated
        auto ok = build_units(t, {"hello", "nope"}, source, coeffs, {"rec", 0.0});
        CHECK(ok.units.size() == 1);
    }
    SUBCASE("out-of-vocabulary words drop the segment") {
        auto t = make_transcript({"hello", "qqqzzz"}, 0.25);
        std::mt19937_64 rng(6);
        auto coeffs = testutil::random_sequence(schema, 15, rng);
        auto result = build_units(t, {"hello", "qqqzzz"}, source, coeffs, {"rec", 0.0});
        CHECK(result.units.size() == 1);
        REQUIRE(result.drops.size() == 1);
        CHECK(result.drops[0].reason.find("qqqzzz") != std::string::npos);
    }
    SUBCASE("timed annotations are selected by midpoint") {
        auto t = make_transcript({"hello", "world"}, 0.5);
        std::mt19937_64 rng(7);
        auto coeffs = testutil::random_sequence(schema, 30, rng);
        PhonemeSource annotated;
        annotated.annotations = PhonemeAnnotations::from_json_text(
            R"([{"symbol":"HH","start":0.0,"end":0.3},{"symbol":"OW1","start":0.3,"end":0.5},
                {"symbol":"W","start":0.5,"end":0.7},{"symbol":"D","start":0.7,"end":1.0}])",
            Lang::en);
        auto result = build_units(t, {"hello", "world"}, annotated, coeffs, {"rec", 0.0});
        REQUIRE(result.units.size() == 2);
        CHECK(result.units[0].phonemes.items.size() == 2);
        CHECK(result.units[1].phonemes.items.size() == 2);
        CHECK(result.units[1].phonemes.items[0].symbol == "W");
        REQUIRE(result.units[1].phonemes.has_spans());
        CHECK(result.units[1].phonemes.spans[0].start == doctest::Approx(0.0)); // relative
    }
}

TEST_CASE("alignment invariants on randomized transcripts") {
    auto lex = en_lexicon();
    PhonemeSource source;
    source.lexicon = &lex;
    std::vector<std::string> pool = {"hello", "world", "you",  "are",  "how",  "the",
                                     "good",  "day",   "see,", "now.", "go",   "home!",
                                     "we",    "walk,", "talk", "sing."};
    std::mt19937_64 rng(123);
    std::vector<double> fps_pool = {24.0, 25.0, 30.0, 60.0};

    for (int rep = 0; rep < 50; ++rep) {
        std::size_t n = 2 + rng() % 25;
        TimedTranscript t;
        t.language = Lang::en;
        double clock = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dur = 0.05 + 0.35 * testutil::uniform01(rng);
            t.tokens.push_back({pool[rng() % pool.size()], clock, clock + dur});
            clock += dur;
        }
        double fps = fps_pool[rng() % fps_pool.size()];
        auto total_frames = static_cast<std::size_t>(frame_ceil(clock, fps));
        auto coeffs = testutil::random_sequence(testutil::two_channel_schema(), total_frames,
                                                rng, fps);
        auto segs = naive_semantic_split(t, 2 + rng() % 6);
        auto result = build_units(t, segs, source, coeffs, {"rec", 0.0});
        REQUIRE(result.drops.empty());
        REQUIRE(result.units.size() == segs.size());

        std::set<std::size_t> emitted, expected;
        for (std::size_t u = 0; u < result.units.size(); ++u) {
            const auto& unit = result.units[u];
            // monotone order
            if (u > 0)
                REQUIRE(unit.audio_span.start >= result.units[u - 1].audio_span.start);
            // locate is a left inverse of span extraction
            auto relocated = locate_token_span(unit.segment.text, t, unit.segment.tokens.begin);
            REQUIRE(relocated == unit.segment.tokens);
            // frame rule recomputed directly
            auto f0 = static_cast<std::size_t>(
                std::max(0LL, static_cast<long long>(std::floor(unit.audio_span.start * fps + 1e-9))));
            auto f1 = static_cast<std::size_t>(std::ceil(unit.audio_span.end * fps - 1e-9));
            f1 = std::min(f1, total_frames);
            REQUIRE(unit.frame_begin == f0);
            REQUIRE(unit.frame_end == f1);
            for (std::size_t f = unit.frame_begin; f < unit.frame_end; ++f) emitted.insert(f);
            for (std::size_t f = f0; f < f1; ++f) expected.insert(f);
            // junction overlap is at most one frame
            if (u > 0) {
                auto prev_end = result.units[u - 1].frame_end;
                REQUIRE(prev_end + 1 >= unit.frame_begin); // gap-free
                REQUIRE(static_cast<long long>(prev_end) -
                            static_cast<long long>(unit.frame_begin) <= 1);
            }
        }
        REQUIRE(emitted == expected);
        // abutting tokens with pad 0: no frame lost over the full stream
        REQUIRE(*emitted.begin() == 0);
        REQUIRE(*emitted.rbegin() + 1 == total_frames);

        // determinism
        auto again = build_units(t, segs, source, coeffs, {"rec", 0.0});
        REQUIRE(again.units.size() == result.units.size());
        for (std::size_t u = 0; u < again.units.size(); ++u) {
            REQUIRE(again.units[u].segment.tokens == result.units[u].segment.tokens);
            REQUIRE(again.units[u].coefficients.values == result.units[u].coefficients.values);
        }
    }
}
