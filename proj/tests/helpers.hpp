#pragma once

// Shared fixtures and deterministic generators for the test suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "speechshape/blendshape.hpp"

namespace testutil {

inline speechshape::ChannelSchema two_channel_schema() {
    return speechshape::ChannelSchema({"jawOpen", "mouthClose"});
}

inline speechshape::ChannelSchema mouth33_schema() {
    return speechshape::ChannelSchema::load(std::string(SPEECHSHAPE_DATA_DIR) +
                                            "/schema_mouth33.json");
}

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline speechshape::BlendshapeSequence random_sequence(const speechshape::ChannelSchema& schema,
                                                       std::size_t frames, std::mt19937_64& rng,
                                                       double fps = 30.0) {
    auto seq = speechshape::BlendshapeSequence::zeros(schema, fps, frames);
    for (double& v : seq.values) v = uniform01(rng);
    return seq;
}

/// Deterministic malformed-generator-output suite: truncations, missing and
/// duplicated keys, out-of-range and non-numeric values, chatter around the
/// payload. Paired with parse_sequence recover-mode invariants.
inline std::vector<std::string> malformed_cases(const speechshape::ChannelSchema& schema) {
    using namespace speechshape;
    std::mt19937_64 rng(2024);
    auto base_seq = random_sequence(schema, 6, rng);
    std::string base = serialize_sequence(base_seq, 2);

    std::vector<std::string> cases;
    // progressive truncations across the payload
    for (int i = 1; i <= 24; ++i) {
        std::size_t cut = base.size() * static_cast<std::size_t>(i) / 25;
        cases.push_back(base.substr(0, cut));
    }
    // missing closing brace / bracket
    cases.push_back(base.substr(0, base.size() - 1));
    cases.push_back(base.substr(0, base.rfind(']')));
    // out-of-range values
    std::string c = base;
    c.replace(c.find("0."), 2, "9."); // first numeric bumped out of range
    cases.push_back(c);
    cases.push_back("{\"" + schema.name(0) + "\":[1.3,-0.5,0.2]}");
    // non-numeric garbage inside a list
    cases.push_back("{\"" + schema.name(0) + "\":[0.1,oops,0.3]}");
    cases.push_back("{\"" + schema.name(0) + "\":[0.1,\"x\",0.3]}");
    cases.push_back("{\"" + schema.name(0) + "\":[0.1,NaN,0.3]}");
    // missing channels
    cases.push_back("{\"" + schema.name(0) + "\":[0.1,0.2]}");
    cases.push_back("{}");
    // channel value not a list
    cases.push_back("{\"" + schema.name(0) + "\":0.5}");
    // unknown extra channel
    cases.push_back("{\"" + schema.name(0) + "\":[0.1],\"notAChannel\":[0.2]}");
    // model chatter around a valid payload
    cases.push_back("Here is the requested output:\n" + base + "\nHope that helps!");
    cases.push_back("```json\n" + base + "\n```");
    // ragged lengths
    {
        auto a = BlendshapeSequence::zeros(schema, 30.0, 3);
        std::string s = serialize_sequence(a, 2);
        std::size_t p = s.find(']');
        s.insert(p, ",0.40"); // first channel one frame longer
        cases.push_back(s);
    }
    // unterminated tail value
    cases.push_back("{\"" + schema.name(0) + "\":[0.10,0.20,0.3");
    // empty and junk-only inputs
    cases.push_back("");
    cases.push_back("null");
    cases.push_back("[]");
    cases.push_back("I could not generate coefficients for this clip.");
    // duplicate key (last one wins in most parsers, must stay sane)
    cases.push_back("{\"" + schema.name(0) + "\":[0.1],\"" + schema.name(0) + "\":[0.9,0.8]}");
    // whitespace-heavy but valid-ish fragment
    cases.push_back("  {\n  \"" + schema.name(0) + "\" : [ 0.10 , 0.20 ]\n");
    while (cases.size() < 50) cases.push_back(base.substr(0, cases.size() * 3));
    return cases;
}

} // namespace testutil
