#pragma once

#include <string>
#include <vector>

#include "speechshape/alignment.hpp"
#include "speechshape/blendshape.hpp"
#include "speechshape/phoneme.hpp"

namespace speechshape {

struct GenerationRequest {
    std::string transcript;
    PhonemeSequence phonemes;
    std::string guidance;
    std::string audio_b64; // inline base64 WAV
    ChannelSchema schema;
    double fps = 30.0;
    int expected_frames = 0;
    int max_tokens = 4096;
};

struct GenerationResponse {
    std::string raw_text;
    ParseOutcome parsed;
    double latency_seconds = 0.0;
    int attempts = 1;
};

struct RemoteConfig {
    std::string endpoint; // http://host:port/path
    std::string auth_token;
    double timeout_seconds = 30.0;
    int retries = 2;
    double backoff_base_seconds = 1.0; // doubles per retry
    int frame_tolerance = 2;
};

/// Deterministic structured prompt: task instruction, channel list in schema
/// order, expected frame count, transcript, phoneme and guidance blocks, and
/// the output-format contract.
std::string assemble_prompt(const GenerationRequest& request);

/// Articulatory baseline: phoneme target keyframes blended with
/// dominance-weighted Gaussian windows w_i(t) = exp(-dom_i ((t-c_i)/s_i)^2),
/// s_i = duration_i / 2. Convex per channel, so clipping is a no-op.
BlendshapeSequence generate_rule_based(const PhonemeSequence& phonemes, double duration_seconds,
                                       int expected_frames, const PriorTable& table, double fps,
                                       std::vector<std::string>* warnings = nullptr);

BlendshapeSequence generate_rule_based(const AlignedUnit& unit, const PriorTable& table,
                                       double fps, std::vector<std::string>* warnings = nullptr);

/// POST {prompt, audio_b64, max_tokens} to the model service, parse the
/// response text in recover mode. Retries (exponential backoff) apply to
/// transport failures only, never to parse failures.
GenerationResponse generate_remote(const GenerationRequest& request, const RemoteConfig& config);

/// Repair small autoregressive length drift by linear resampling; drift
/// beyond the tolerance is an error.
BlendshapeSequence fit_frame_count(const BlendshapeSequence& seq, int expected_frames,
                                   int tolerance = 2);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

} // namespace speechshape
