#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speechshape/errors.hpp"

namespace speechshape {

/// Decoded 16-bit PCM WAV payload (mono or stereo, interleaved).
struct WavData {
    std::uint32_t sample_rate = 16000;
    std::uint16_t channels = 1;
    std::vector<std::int16_t> samples; // interleaved

    std::size_t frame_count() const { return channels ? samples.size() / channels : 0; }
    double duration_seconds() const {
        return sample_rate ? static_cast<double>(frame_count()) / sample_rate : 0.0;
    }
};

WavData read_wav(const std::string& bytes);
WavData read_wav_file(const std::string& path);
std::string write_wav(const WavData& wav);

/// Extract the span [start, end) seconds as a standalone WAV, preserving
/// sample rate, channel count, and bit depth. Sample indices are rounded.
std::string slice_audio(const std::string& wav_bytes, double start, double end);

} // namespace speechshape
