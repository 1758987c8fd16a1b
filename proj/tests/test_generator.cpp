#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mock_server.hpp"
#include "speechshape/generator.hpp"

using namespace speechshape;

namespace {

PriorTable prior_table() {
    return PriorTable::load(std::string(SPEECHSHAPE_DATA_DIR) + "/articulation_priors.json",
                            testutil::mouth33_schema());
}

PhonemeSequence seq_of(const std::vector<std::string>& symbols, Lang lang = Lang::en) {
    PhonemeSequence seq;
    seq.language = lang;
    for (const auto& s : symbols) seq.items.push_back(make_phoneme(s, lang));
    return seq;
}

GenerationRequest basic_request(int frames = 12) {
    GenerationRequest req;
    req.transcript = "hello world";
    req.phonemes = seq_of({"HH", "AH0", "L", "OW1"});
    req.guidance = "Articulation guidance:\n- close_vowel (AH0): narrow jaw.\n";
    req.audio_b64 = base64_encode("RIFFfake");
    req.schema = testutil::mouth33_schema();
    req.fps = 30.0;
    req.expected_frames = frames;
    return req;
}

std::size_t nearest_frame(double center_seconds, double fps) {
    return static_cast<std::size_t>(std::llround(center_seconds * fps - 0.5));
}

} // namespace

TEST_CASE("assemble prompt") {
    auto req = basic_request(12);
    auto prompt = assemble_prompt(req);

    SUBCASE("channel list names every channel exactly once") {
        auto line_start = prompt.find("Channels (output order): ");
        REQUIRE(line_start != std::string::npos);
        auto line = prompt.substr(line_start, prompt.find('\n', line_start) - line_start);
        for (const auto& name : req.schema.names()) {
            auto first = line.find(name);
            REQUIRE(first != std::string::npos);
            // exactly once: names may prefix one another (jawLeft / jawLeftX),
            // so search for a second standalone occurrence
            auto second = line.find(", " + name + ",", first + 1);
            CHECK(second == std::string::npos);
        }
    }
    SUBCASE("states the frame contract") {
        CHECK(prompt.find("exactly 12 values per channel") != std::string::npos);
    }
    SUBCASE("empty guidance still states the output contract") {
        auto req2 = basic_request();
        req2.guidance.clear();
        auto p = assemble_prompt(req2);
        CHECK(p.find("Output contract:") != std::string::npos);
        CHECK(p.find("single JSON object") != std::string::npos);
    }
    SUBCASE("injective over differing inputs") {
        auto p1 = assemble_prompt(req);
        auto r2 = basic_request();
        r2.transcript = "hello there";
        auto r3 = basic_request(13);
        auto r4 = basic_request();
        r4.phonemes = seq_of({"B", "AA1"});
        CHECK(p1 != assemble_prompt(r2));
        CHECK(p1 != assemble_prompt(r3));
        CHECK(p1 != assemble_prompt(r4));
    }
    SUBCASE("deterministic") {
        CHECK(assemble_prompt(req) == assemble_prompt(basic_request(12)));
    }
}

TEST_CASE("rule-based generation") {
    auto table = prior_table();
    auto schema = table.schema();
    std::size_t jaw = schema.index_of("jawOpen");
    std::size_t close = schema.index_of("mouthClose");

    SUBCASE("single bilabial holds its target pose") {
        auto out = generate_rule_based(seq_of({"B"}), 0.4, 12, table, 30.0);
        REQUIRE(out.frames == 12);
        for (std::size_t t = 0; t < 12; ++t) {
            CHECK(out.at(t, close) == doctest::Approx(0.8).epsilon(1e-12));
            CHECK(out.at(t, jaw) == 0.0);
        }
    }
    SUBCASE("silence-only is all zero") {
        auto out = generate_rule_based(seq_of({"sil", "sil"}), 0.4, 12, table, 30.0);
        for (double v : out.values) CHECK(v == 0.0);
    }
    SUBCASE("bilabial then open vowel dominate their own centers") {
        auto phonemes = seq_of({"B", "AA1"});
        phonemes.spans = {{0.0, 0.2}, {0.2, 0.4}};
        auto out = generate_rule_based(phonemes, 0.4, 12, table, 30.0);
        auto tb = nearest_frame(0.1, 30.0);
        auto tv = nearest_frame(0.3, 30.0);
        CHECK(out.at(tb, close) > out.at(tb, jaw));
        CHECK(out.at(tv, jaw) > out.at(tv, close));
    }
    SUBCASE("output is convex: clipping is a no-op") {
        std::mt19937_64 rng(15);
        std::vector<std::string> pool = {"B",  "AA1", "UW0", "S",  "K",
                                         "F",  "IY1", "M",   "sil"};
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<std::string> syms;
            std::size_t n = 1 + rng() % 8;
            for (std::size_t i = 0; i < n; ++i) syms.push_back(pool[rng() % pool.size()]);
            auto out = generate_rule_based(seq_of(syms), 0.1 * static_cast<double>(n),
                                           static_cast<int>(3 * n), table, 30.0);
            CHECK(out.in_range());
            CHECK(clip_sequence(out).values == out.values);
        }
    }
    SUBCASE("translation equivariance on integer-frame shifts") {
        auto phonemes = seq_of({"B", "AA1", "M"});
        phonemes.spans = {{0.05, 0.15}, {0.15, 0.35}, {0.35, 0.45}};
        auto base = generate_rule_based(phonemes, 0.5, 15, table, 30.0);

        const int shift_frames = 6;
        const double delta = shift_frames / 30.0;
        auto shifted = phonemes;
        for (auto& s : shifted.spans) { s.start += delta; s.end += delta; }
        auto moved = generate_rule_based(shifted, 0.5 + delta, 15 + shift_frames, table, 30.0);
        for (std::size_t t = 0; t < 15; ++t)
            for (std::size_t k = 0; k < base.channels(); ++k)
                REQUIRE(moved.at(t + shift_frames, k) ==
                        doctest::Approx(base.at(t, k)).epsilon(1e-12));
    }
    SUBCASE("empty phoneme sequence warns and zeroes") {
        std::vector<std::string> warnings;
        PhonemeSequence empty;
        empty.language = Lang::en;
        auto out = generate_rule_based(empty, 0.4, 12, table, 30.0, &warnings);
        CHECK(out.frames == 12);
        for (double v : out.values) CHECK(v == 0.0);
        CHECK(warnings.size() == 1);
    }
    SUBCASE("exact frame count") {
        for (int frames : {1, 7, 33}) {
            auto out = generate_rule_based(seq_of({"B", "AA1"}), 0.5, frames, table, 30.0);
            CHECK(out.frames == static_cast<std::size_t>(frames));
        }
    }
}

TEST_CASE("fit frame count") {
    auto schema = testutil::two_channel_schema();
    std::mt19937_64 rng(21);
    auto seq = testutil::random_sequence(schema, 10, rng);

    SUBCASE("matching length is untouched") {
        CHECK(fit_frame_count(seq, 10).values == seq.values);
    }
    SUBCASE("off-by-one resamples, endpoints exact") {
        auto out = fit_frame_count(seq, 11);
        REQUIRE(out.frames == 11);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(out.at(0, k) == seq.at(0, k));
            CHECK(out.at(10, k) == seq.at(9, k));
        }
        auto down = fit_frame_count(seq, 9);
        REQUIRE(down.frames == 9);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(down.at(0, k) == seq.at(0, k));
            CHECK(down.at(8, k) == seq.at(9, k));
        }
    }
    SUBCASE("drift beyond tolerance fails loudly") {
        CHECK_THROWS_AS(fit_frame_count(seq, 20, 2), LengthMismatchError);
        CHECK_THROWS_AS(fit_frame_count(seq, 7, 2), LengthMismatchError);
    }
}

TEST_CASE("base64 round trip") {
    std::mt19937_64 rng(31);
    for (std::size_t len : {0u, 1u, 2u, 3u, 17u, 256u}) {
        std::string bytes;
        for (std::size_t i = 0; i < len; ++i) bytes.push_back(static_cast<char>(rng() & 0xff));
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK(base64_encode("abc") == "YWJj");
    CHECK_THROWS_AS(base64_decode("!!!"), Error);
}

TEST_CASE("remote generation") {
    auto schema = testutil::mouth33_schema();

    SUBCASE("happy path returns clean parse") {
        std::mt19937_64 rng(41);
        auto canned = testutil::random_sequence(schema, 12, rng);
        auto canned_text = serialize_sequence(canned, 2);
        testutil::MockModelServer server(
            [&](const std::string&, const std::string&) { return canned_text; });

        auto req = basic_request(12);
        RemoteConfig cfg{server.endpoint(), "", 5.0, 2, 0.01, 2};
        auto res = generate_remote(req, cfg);
        CHECK(res.parsed.warnings.empty());
        CHECK(res.parsed.sequence.frames == 12);
        CHECK(res.attempts == 1);
        CHECK(res.latency_seconds >= 0.0);
    }
    SUBCASE("truncated response is recovered with warnings") {
        std::mt19937_64 rng(42);
        auto canned = testutil::random_sequence(schema, 6, rng);
        auto text = serialize_sequence(canned, 2);
        auto truncated = text.substr(0, text.size() * 2 / 3);
        testutil::MockModelServer server(
            [&](const std::string&, const std::string&) { return truncated; });

        RemoteConfig cfg{server.endpoint(), "", 5.0, 1, 0.01, 2};
        auto res = generate_remote(basic_request(6), cfg);
        CHECK_FALSE(res.parsed.warnings.empty());
        CHECK(res.parsed.sequence.in_range());
    }
    SUBCASE("transport errors are retried with backoff") {
        int failures = 2;
        std::mt19937_64 rng(43);
        auto canned_text = serialize_sequence(testutil::random_sequence(schema, 12, rng), 2);
        testutil::MockModelServer server(
            [&](const std::string&, const std::string&) -> std::optional<std::string> {
                if (failures > 0) { --failures; return std::nullopt; }
                return canned_text;
            });
        RemoteConfig cfg{server.endpoint(), "", 5.0, 2, 0.01, 2};
        auto res = generate_remote(basic_request(12), cfg);
        CHECK(res.attempts == 3);
        CHECK(server.hits() == 3);
    }
    SUBCASE("parse failures are never retried") {
        testutil::MockModelServer server(
            [&](const std::string&, const std::string&) { return std::string("no can do"); });
        RemoteConfig cfg{server.endpoint(), "", 5.0, 3, 0.01, 2};
        CHECK_THROWS_AS(generate_remote(basic_request(12), cfg), ParseFailureError);
        CHECK(server.hits() == 1);
    }
    SUBCASE("unreachable endpoint exhausts retries") {
        RemoteConfig cfg{"http://127.0.0.1:9/generate", "", 0.2, 1, 0.01, 2};
        CHECK_THROWS_AS(generate_remote(basic_request(12), cfg), TransportError);
    }
    SUBCASE("length drift beyond tolerance is flagged") {
        std::mt19937_64 rng(44);
        auto canned_text = serialize_sequence(testutil::random_sequence(schema, 20, rng), 2);
        testutil::MockModelServer server(
            [&](const std::string&, const std::string&) { return canned_text; });
        RemoteConfig cfg{server.endpoint(), "", 5.0, 0, 0.01, 2};
        auto res = generate_remote(basic_request(12), cfg);
        bool flagged = false;
        for (const auto& w : res.parsed.warnings)
            if (w.find("LengthMismatch") != std::string::npos) flagged = true;
        CHECK(flagged);
    }
}
