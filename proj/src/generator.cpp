#include "speechshape/generator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace speechshape {

using json = nlohmann::json;

namespace {

const char kB64Table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string format_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace

std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16 |
                          static_cast<unsigned char>(bytes[i + 1]) << 8 |
                          static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kB64Table[(v >> 18) & 63]);
        out.push_back(kB64Table[(v >> 12) & 63]);
        out.push_back(kB64Table[(v >> 6) & 63]);
        out.push_back(kB64Table[v & 63]);
        i += 3;
    }
    std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(kB64Table[(v >> 18) & 63]);
        out.push_back(kB64Table[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16 |
                          static_cast<unsigned char>(bytes[i + 1]) << 8;
        out.push_back(kB64Table[(v >> 18) & 63]);
        out.push_back(kB64Table[(v >> 12) & 63]);
        out.push_back(kB64Table[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::string out;
    int acc = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = value_of(c);
        if (v < 0) throw Error("invalid base64 input");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::string assemble_prompt(const GenerationRequest& request) {
    std::string prompt;
    prompt += "You convert a speech segment into mouth blendshape coefficients.\n\n";
    prompt += "Channels (output order): ";
    for (std::size_t k = 0; k < request.schema.size(); ++k) {
        if (k) prompt += ", ";
        prompt += request.schema.name(k);
    }
    prompt += "\n";
    prompt += "Frame rate: " + format_num(request.fps) + " fps\n";
    prompt += "Frames: exactly " + std::to_string(request.expected_frames) +
              " values per channel\n\n";
    prompt += "Transcript:\n" + request.transcript + "\n\n";
    prompt += "Phonemes:\n";
    for (std::size_t i = 0; i < request.phonemes.items.size(); ++i) {
        if (i) prompt += " ";
        prompt += request.phonemes.items[i].symbol;
    }
    prompt += "\n\n";
    if (!request.guidance.empty()) prompt += request.guidance + "\n";
    prompt += "Output contract:\n";
    prompt += "Respond with a single JSON object and nothing else. Keys are exactly the "
              "channel names above, in that order. Each value is a list of exactly " +
              std::to_string(request.expected_frames) +
              " numbers in [0, 1] with 2 decimal places, one per frame.\n";
    return prompt;
}

BlendshapeSequence generate_rule_based(const PhonemeSequence& phonemes, double duration_seconds,
                                       int expected_frames, const PriorTable& table, double fps,
                                       std::vector<std::string>* warnings) {
    const ChannelSchema& schema = table.schema();
    auto out = BlendshapeSequence::zeros(schema, fps, static_cast<std::size_t>(expected_frames));
    if (phonemes.items.empty()) {
        if (warnings) warnings->push_back("empty phoneme sequence; generated all-zero output");
        return out;
    }

    const std::size_t n = phonemes.items.size();
    const std::size_t K = schema.size();
    std::vector<double> centers(n), sigmas(n), dominances(n);
    std::vector<std::vector<double>> targets(n, std::vector<double>(K, 0.0));

    const double min_sigma = 0.5 / fps;
    if (phonemes.has_spans()) {
        for (std::size_t i = 0; i < n; ++i) {
            centers[i] = phonemes.spans[i].mid();
            sigmas[i] = std::max(min_sigma, phonemes.spans[i].length() / 2.0);
        }
    } else {
        double total = 0.0;
        std::vector<double> nominal(n);
        for (std::size_t i = 0; i < n; ++i) {
            nominal[i] = table.prior_for(phonemes.items[i]).nominal_duration;
            total += nominal[i];
        }
        double scale = total > 0.0 ? duration_seconds / total : 0.0;
        double clock = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dur = nominal[i] * scale;
            centers[i] = clock + dur / 2.0;
            sigmas[i] = std::max(min_sigma, dur / 2.0);
            clock += dur;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto prior = table.prior_for(phonemes.items[i]);
        dominances[i] = prior.dominance;
        for (const auto& [channel, value] : prior.targets) {
            std::size_t k = schema.index_of(channel);
            if (k != ChannelSchema::npos) targets[i][k] = value;
        }
    }

    for (int f = 0; f < expected_frames; ++f) {
        double t = (f + 0.5) / fps;
        double denom = 0.0;
        std::vector<double> num(K, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double z = (t - centers[i]) / sigmas[i];
            double w = std::exp(-dominances[i] * z * z);
            if (w <= 0.0) continue;
            denom += w;
            for (std::size_t k = 0; k < K; ++k) num[k] += w * targets[i][k];
        }
        if (denom <= 1e-300) continue; // too far from every keyframe: rest pose
        for (std::size_t k = 0; k < K; ++k)
            out.at(static_cast<std::size_t>(f), k) = num[k] / denom;
    }
    return out;
}

BlendshapeSequence generate_rule_based(const AlignedUnit& unit, const PriorTable& table,
                                       double fps, std::vector<std::string>* warnings) {
    double duration = unit.audio_span.length();
    auto frames = static_cast<int>(unit.frame_end - unit.frame_begin);
    return generate_rule_based(unit.phonemes, duration, frames, table, fps, warnings);
}

namespace {

struct ParsedEndpoint {
    std::string base; // scheme://host:port
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must look like http://host:port/path, got \"" + endpoint + "\"");
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

} // namespace

GenerationResponse generate_remote(const GenerationRequest& request, const RemoteConfig& config) {
    auto ep = parse_endpoint(config.endpoint);
    httplib::Client client(ep.base);
    auto timeout = std::chrono::milliseconds(
        static_cast<long long>(config.timeout_seconds * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!config.auth_token.empty())
        headers.emplace("Authorization", "Bearer " + config.auth_token);

    json body = {{"prompt", assemble_prompt(request)},
                 {"audio_b64", request.audio_b64},
                 {"max_tokens", request.max_tokens}};
    const std::string payload = body.dump();

    const auto t0 = std::chrono::steady_clock::now();
    std::string last_error;
    bool timed_out = false;
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0) {
            double delay = config.backoff_base_seconds * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                        res.error() == httplib::Error::Read;
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            timed_out = false;
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        std::string text;
        try {
            json envelope = json::parse(res->body);
            text = envelope.at("text").get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("malformed service response: ") + e.what();
            continue;
        }
        GenerationResponse out;
        out.raw_text = std::move(text);
        out.attempts = attempt + 1;
        // Parse failures are terminal: retrying would replay the same text.
        out.parsed = parse_sequence(out.raw_text, request.schema, ParseMode::recover, request.fps);
        auto frames = static_cast<long long>(out.parsed.sequence.frames);
        if (std::llabs(frames - request.expected_frames) >
            static_cast<long long>(config.frame_tolerance))
            out.parsed.warnings.push_back(
                "LengthMismatch: got " + std::to_string(frames) + " frames, expected " +
                std::to_string(request.expected_frames));
        out.latency_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }
    std::string msg = "remote generation failed after " + std::to_string(config.retries + 1) +
                      " attempts: " + last_error;
    if (timed_out) throw TimeoutError(msg);
    throw TransportError(msg);
}

BlendshapeSequence fit_frame_count(const BlendshapeSequence& seq, int expected_frames,
                                   int tolerance) {
    if (expected_frames < 0) throw Error("expected_frames must be >= 0");
    auto t = static_cast<long long>(seq.frames);
    if (t == expected_frames) return seq;
    if (std::llabs(t - expected_frames) > tolerance)
        throw LengthMismatchError("sequence has " + std::to_string(seq.frames) +
                                  " frames, expected " + std::to_string(expected_frames) +
                                  " (tolerance " + std::to_string(tolerance) + ")");
    if (seq.frames == 0)
        throw LengthMismatchError("cannot resample an empty sequence");

    auto out = BlendshapeSequence::zeros(seq.schema, seq.fps,
                                         static_cast<std::size_t>(expected_frames));
    for (int f = 0; f < expected_frames; ++f) {
        double pos = expected_frames > 1
                         ? static_cast<double>(f) * static_cast<double>(seq.frames - 1) /
                               (expected_frames - 1)
                         : 0.0;
        auto i0 = static_cast<std::size_t>(pos);
        i0 = std::min(i0, seq.frames - 1);
        std::size_t i1 = std::min(i0 + 1, seq.frames - 1);
        double frac = pos - static_cast<double>(i0);
        for (std::size_t k = 0; k < seq.channels(); ++k)
            out.at(static_cast<std::size_t>(f), k) =
                (1.0 - frac) * seq.at(i0, k) + frac * seq.at(i1, k);
    }
    return out;
}

} // namespace speechshape
