#include "speechshape/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace speechshape {

namespace {

std::uint32_t read_u32(const std::string& b, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                      static_cast<unsigned char>(b[off + 1]) << 8);
}

void append_u32(std::string& b, std::uint32_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>((v >> 8) & 0xff));
    b.push_back(static_cast<char>((v >> 16) & 0xff));
    b.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_u16(std::string& b, std::uint16_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>((v >> 8) & 0xff));
}

} // namespace

WavData read_wav(const std::string& bytes) {
    if (bytes.size() < 44 || bytes.compare(0, 4, "RIFF") != 0 ||
        bytes.compare(8, 4, "WAVE") != 0)
        throw WavError("not a RIFF/WAVE file");

    WavData wav;
    bool have_fmt = false, have_data = false;
    std::size_t pos = 12;
    std::uint16_t bits = 0;
    while (pos + 8 <= bytes.size()) {
        std::string id = bytes.substr(pos, 4);
        std::uint32_t size = read_u32(bytes, pos + 4);
        std::size_t body = pos + 8;
        if (body + size > bytes.size()) size = static_cast<std::uint32_t>(bytes.size() - body);
        if (id == "fmt ") {
            if (size < 16) throw WavError("fmt chunk too small");
            std::uint16_t format = read_u16(bytes, body);
            wav.channels = read_u16(bytes, body + 2);
            wav.sample_rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            if (format != 1)
                throw UnsupportedEncodingError("only PCM (format 1) WAV is supported, got format " +
                                               std::to_string(format));
            if (bits != 16)
                throw UnsupportedEncodingError("only 16-bit PCM is supported, got " +
                                               std::to_string(bits) + "-bit");
            if (wav.channels != 1 && wav.channels != 2)
                throw UnsupportedEncodingError("only mono or stereo supported, got " +
                                               std::to_string(wav.channels) + " channels");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw WavError("data chunk before fmt chunk");
            std::size_t n = size / 2;
            wav.samples.resize(n);
            std::memcpy(wav.samples.data(), bytes.data() + body, n * 2);
            have_data = true;
        }
        pos = body + size + (size & 1); // chunks are word-aligned
    }
    if (!have_fmt || !have_data) throw WavError("missing fmt or data chunk");
    return wav;
}

WavData read_wav_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw WavError("cannot open WAV file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return read_wav(ss.str());
}

std::string write_wav(const WavData& wav) {
    std::string out;
    std::uint32_t data_size = static_cast<std::uint32_t>(wav.samples.size() * 2);
    out.reserve(44 + data_size);
    out += "RIFF";
    append_u32(out, 36 + data_size);
    out += "WAVEfmt ";
    append_u32(out, 16);
    append_u16(out, 1); // PCM
    append_u16(out, wav.channels);
    append_u32(out, wav.sample_rate);
    append_u32(out, wav.sample_rate * wav.channels * 2); // byte rate
    append_u16(out, static_cast<std::uint16_t>(wav.channels * 2)); // block align
    append_u16(out, 16);
    out += "data";
    append_u32(out, data_size);
    out.append(reinterpret_cast<const char*>(wav.samples.data()), data_size);
    return out;
}

std::string slice_audio(const std::string& wav_bytes, double start, double end) {
    WavData wav = read_wav(wav_bytes);
    if (start < -1e-9 || end < start)
        throw SpanError("invalid audio span [" + std::to_string(start) + ", " +
                        std::to_string(end) + ")");
    double duration = wav.duration_seconds();
    if (end > duration + 1e-6)
        throw SpanError("audio span end " + std::to_string(end) +
                        " outside recording duration " + std::to_string(duration));
    auto first = static_cast<std::size_t>(std::llround(std::max(0.0, start) * wav.sample_rate));
    auto last = static_cast<std::size_t>(std::llround(end * wav.sample_rate));
    first = std::min(first, wav.frame_count());
    last = std::min(last, wav.frame_count());

    WavData out;
    out.sample_rate = wav.sample_rate;
    out.channels = wav.channels;
    out.samples.assign(wav.samples.begin() + static_cast<std::ptrdiff_t>(first * wav.channels),
                       wav.samples.begin() + static_cast<std::ptrdiff_t>(last * wav.channels));
    return write_wav(out);
}

} // namespace speechshape
