#include "speechshape/blendshape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace speechshape {

using json = nlohmann::json;

namespace {

/// Fixed-point formatting with round-half-even, independent of locale and
/// printf; identical inputs always yield identical bytes.
std::string format_fixed(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    // nearbyint uses the default FE_TONEAREST mode (ties to even).
    double scaled = std::nearbyint(v * scale);
    auto n = static_cast<long long>(scaled);
    bool neg = n < 0;
    unsigned long long mag = neg ? static_cast<unsigned long long>(-(n + 1)) + 1ULL
                                 : static_cast<unsigned long long>(n);
    auto unit = static_cast<unsigned long long>(scale + 0.5);
    unsigned long long whole = mag / unit;
    unsigned long long frac = mag % unit;
    std::string out;
    if (neg) out.push_back('-');
    out += std::to_string(whole);
    out.push_back('.');
    std::string f = std::to_string(frac);
    out.append(static_cast<std::size_t>(decimals) - f.size(), '0');
    out += f;
    return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

void skip_ws(const std::string& s, std::size_t& i) {
    while (i < s.size() && is_space(s[i])) ++i;
}

/// Lenient per-channel list extraction used when the text is not valid JSON.
/// Finds `"name"` followed by ':' and '[' and collects complete numeric
/// values. A value counts as complete only when terminated by ',' or ']'.
struct ScannedList {
    bool found = false;
    bool complete = false; // closing ']' was seen
    std::vector<double> values;
};

ScannedList scan_channel(const std::string& text, const std::string& name) {
    ScannedList out;
    const std::string key = "\"" + name + "\"";
    std::size_t pos = text.find(key);
    if (pos == std::string::npos) return out;
    std::size_t i = pos + key.size();
    skip_ws(text, i);
    if (i >= text.size() || text[i] != ':') return out;
    ++i;
    skip_ws(text, i);
    if (i >= text.size() || text[i] != '[') return out;
    ++i;
    out.found = true;
    for (;;) {
        skip_ws(text, i);
        if (i >= text.size()) return out;
        if (text[i] == ']') {
            out.complete = true;
            return out;
        }
        const char* begin = text.c_str() + i;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) return out; // junk: drop tail
        std::size_t j = i + static_cast<std::size_t>(end - begin);
        skip_ws(text, j);
        if (j >= text.size()) return out; // unterminated tail value: drop
        if (text[j] == ',') {
            if (!std::isfinite(v)) return out;
            out.values.push_back(v);
            i = j + 1;
        } else if (text[j] == ']') {
            if (!std::isfinite(v)) return out;
            out.values.push_back(v);
            out.complete = true;
            return out;
        } else {
            return out; // unexpected separator: drop tail
        }
    }
}

} // namespace

ChannelSchema::ChannelSchema(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw SchemaError("schema contains an empty channel name");
        if (!seen.insert(n).second)
            throw SchemaError("schema contains duplicate channel name \"" + n + "\"");
    }
}

ChannelSchema ChannelSchema::from_json_text(const std::string& text) {
    json j = json::parse(text);
    if (!j.is_object() || !j.contains("channels") || !j["channels"].is_array())
        throw SchemaError("schema file must be an object with a \"channels\" array");
    std::vector<std::string> names;
    for (const auto& e : j["channels"]) {
        if (!e.is_string()) throw SchemaError("schema channel names must be strings");
        names.push_back(e.get<std::string>());
    }
    return ChannelSchema(std::move(names));
}

ChannelSchema ChannelSchema::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open schema file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::size_t ChannelSchema::index_of(const std::string& name) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
        if (names_[k] == name) return k;
    return npos;
}

BlendshapeSequence BlendshapeSequence::zeros(ChannelSchema schema, double fps,
                                             std::size_t frames) {
    BlendshapeSequence s;
    s.schema = std::move(schema);
    s.fps = fps;
    s.frames = frames;
    s.values.assign(frames * s.schema.size(), 0.0);
    return s;
}

std::vector<double> BlendshapeSequence::channel(std::size_t k) const {
    std::vector<double> out(frames);
    for (std::size_t t = 0; t < frames; ++t) out[t] = at(t, k);
    return out;
}

void BlendshapeSequence::set_channel(std::size_t k, const std::vector<double>& data) {
    for (std::size_t t = 0; t < frames; ++t) at(t, k) = data[t];
}

bool BlendshapeSequence::in_range() const {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::string serialize_sequence(const BlendshapeSequence& seq, int decimals) {
    if (decimals < 1 || decimals > 6)
        throw ParseError("serialization decimals must be in [1, 6]");
    std::string out = "{";
    for (std::size_t k = 0; k < seq.channels(); ++k) {
        if (k) out.push_back(',');
        out.push_back('"');
        out += seq.schema.name(k);
        out += "\":[";
        for (std::size_t t = 0; t < seq.frames; ++t) {
            if (t) out.push_back(',');
            out += format_fixed(seq.at(t, k), decimals);
        }
        out.push_back(']');
    }
    out.push_back('}');
    return out;
}

namespace {

ParseOutcome parse_strict(const json& j, const ChannelSchema& schema, double fps) {
    if (!j.is_object()) throw ParseError("expected a JSON object");
    for (const auto& [key, val] : j.items()) {
        if (!schema.has(key)) throw ParseError("unknown channel \"" + key + "\"");
        (void)val;
    }
    std::size_t frames = 0;
    bool first = true;
    for (const auto& name : schema.names()) {
        if (!j.contains(name)) throw ParseError("missing channel \"" + name + "\"");
        const json& arr = j[name];
        if (!arr.is_array()) throw ParseError("channel \"" + name + "\" is not a list");
        for (const auto& e : arr)
            if (!e.is_number())
                throw ParseError("channel \"" + name + "\" has a non-numeric value");
        if (first) {
            frames = arr.size();
            first = false;
        } else if (arr.size() != frames) {
            throw ParseError("channel \"" + name + "\" length " +
                             std::to_string(arr.size()) + " != " + std::to_string(frames));
        }
    }
    ParseOutcome out;
    out.mode = ParseMode::strict;
    out.sequence = BlendshapeSequence::zeros(schema, fps, frames);
    for (std::size_t k = 0; k < schema.size(); ++k) {
        const json& arr = j[schema.name(k)];
        for (std::size_t t = 0; t < frames; ++t) {
            double v = arr[t].get<double>();
            if (v < 0.0 || v > 1.0)
                throw ParseError("channel \"" + schema.name(k) + "\" value " +
                                 std::to_string(v) + " outside [0, 1]");
            out.sequence.at(t, k) = v;
        }
    }
    return out;
}

} // namespace

ParseOutcome parse_sequence(const std::string& text, const ChannelSchema& schema,
                            ParseMode mode, double fps) {
    if (schema.size() == 0) throw SchemaError("empty schema");

    json parsed;
    bool json_ok = false;
    try {
        parsed = json::parse(text);
        json_ok = parsed.is_object();
    } catch (const json::exception&) {
        json_ok = false;
    }

    if (mode == ParseMode::strict) {
        if (!json_ok) throw ParseError("input is not a JSON object");
        return parse_strict(parsed, schema, fps);
    }

    // Recover mode. Prefer the strict interpretation when it holds: a fully
    // valid payload (including the empty T=0 case) needs no repair.
    if (json_ok) {
        try {
            return parse_strict(parsed, schema, fps);
        } catch (const ParseError&) {
            // fall through to recovery
        }
    }

    ParseOutcome out;
    out.mode = ParseMode::recover;
    std::vector<std::vector<double>> lists(schema.size());
    std::vector<bool> present(schema.size(), false);
    std::vector<bool> truncated_tail(schema.size(), false);

    if (json_ok) {
        for (const auto& [key, val] : parsed.items()) {
            if (!schema.has(key))
                out.warnings.push_back("ignored unknown channel \"" + key + "\"");
            (void)val;
        }
        for (std::size_t k = 0; k < schema.size(); ++k) {
            const auto& name = schema.name(k);
            if (!parsed.contains(name)) continue;
            const json& arr = parsed[name];
            if (!arr.is_array()) {
                out.warnings.push_back("channel \"" + name + "\" is not a list; filled with zeros");
                continue;
            }
            present[k] = true;
            for (const auto& e : arr) {
                if (!e.is_number()) {
                    truncated_tail[k] = true;
                    out.warnings.push_back("channel \"" + name +
                                           "\" truncated at a non-numeric value");
                    break;
                }
                lists[k].push_back(e.get<double>());
            }
        }
    } else {
        for (std::size_t k = 0; k < schema.size(); ++k) {
            ScannedList sl = scan_channel(text, schema.name(k));
            if (!sl.found) continue;
            present[k] = true;
            lists[k] = std::move(sl.values);
            truncated_tail[k] = !sl.complete;
        }
    }

    bool any_present = false;
    std::size_t min_len = 0;
    for (std::size_t k = 0; k < schema.size(); ++k) {
        if (!present[k]) continue;
        min_len = any_present ? std::min(min_len, lists[k].size()) : lists[k].size();
        any_present = true;
    }
    if (!any_present || min_len == 0)
        throw ParseFailureError("no complete frame could be recovered");

    out.sequence = BlendshapeSequence::zeros(schema, fps, min_len);
    for (std::size_t k = 0; k < schema.size(); ++k) {
        const auto& name = schema.name(k);
        if (!present[k]) {
            out.warnings.push_back("missing channel \"" + name + "\" filled with zeros");
            continue;
        }
        if (lists[k].size() > min_len || (truncated_tail[k] && !json_ok)) {
            out.warnings.push_back("channel \"" + name + "\" truncated to " +
                                   std::to_string(min_len) + " frames");
        }
        bool clipped = false;
        for (std::size_t t = 0; t < min_len; ++t) {
            double v = lists[k][t];
            if (v < 0.0 || v > 1.0) {
                v = std::clamp(v, 0.0, 1.0);
                clipped = true;
            }
            out.sequence.at(t, k) = v;
        }
        if (clipped)
            out.warnings.push_back("channel \"" + name + "\" had out-of-range values clipped");
    }
    return out;
}

BlendshapeSequence clip_sequence(const BlendshapeSequence& seq) {
    BlendshapeSequence out = seq;
    for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
    return out;
}

BlendshapeSequence read_csv(const std::string& text, const ChannelSchema& schema,
                            double fps_hint) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    if (lines.empty()) throw CsvError("empty CSV");

    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::string f;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(f);
                f.clear();
            } else {
                f.push_back(c);
            }
        }
        fields.push_back(f);
        return fields;
    };

    auto header = split(lines[0]);
    bool has_time = !header.empty() && header[0] == "time";
    std::size_t offset = has_time ? 1 : 0;
    if (header.size() - offset != schema.size())
        throw CsvError("CSV has " + std::to_string(header.size() - offset) +
                       " value columns, schema expects " + std::to_string(schema.size()));
    for (std::size_t k = 0; k < schema.size(); ++k) {
        if (header[offset + k] != schema.name(k))
            throw CsvError("CSV column \"" + header[offset + k] + "\" does not match schema channel \"" +
                           schema.name(k) + "\"");
    }

    std::size_t frames = lines.size() - 1;
    BlendshapeSequence seq = BlendshapeSequence::zeros(schema, fps_hint, frames);
    std::vector<double> times;
    for (std::size_t t = 0; t < frames; ++t) {
        auto fields = split(lines[t + 1]);
        if (fields.size() != header.size())
            throw CsvError("row " + std::to_string(t + 2) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()));
        auto parse_num = [&](const std::string& s) {
            const char* b = s.c_str();
            char* e = nullptr;
            double v = std::strtod(b, &e);
            if (e == b || *e != '\0' || !std::isfinite(v))
                throw CsvError("non-numeric cell \"" + s + "\" in row " + std::to_string(t + 2));
            return v;
        };
        if (has_time) times.push_back(parse_num(fields[0]));
        for (std::size_t k = 0; k < schema.size(); ++k)
            seq.at(t, k) = parse_num(fields[offset + k]);
    }

    if (has_time && times.size() >= 2) {
        double total = times.back() - times.front();
        if (total <= 0.0) throw CsvError("time column is not increasing");
        double inferred = static_cast<double>(times.size() - 1) / total;
        double snapped = std::nearbyint(inferred);
        double fps = (std::abs(inferred - snapped) < 0.01 && snapped > 0) ? snapped : inferred;
        double nominal = 1.0 / fps;
        for (std::size_t t = 1; t < times.size(); ++t) {
            double dt = times[t] - times[t - 1];
            if (std::abs(dt - nominal) > 0.01 * nominal)
                throw CsvError("time spacing at row " + std::to_string(t + 2) +
                               " deviates more than 1% from " + std::to_string(nominal) + " s");
        }
        seq.fps = fps;
    }
    return seq;
}

std::string write_csv(const BlendshapeSequence& seq, int decimals, bool include_time) {
    std::string out;
    if (include_time) out += "time";
    for (std::size_t k = 0; k < seq.channels(); ++k) {
        if (k || include_time) out.push_back(',');
        out += seq.schema.name(k);
    }
    out.push_back('\n');
    for (std::size_t t = 0; t < seq.frames; ++t) {
        if (include_time) out += format_fixed(static_cast<double>(t) / seq.fps, 6);
        for (std::size_t k = 0; k < seq.channels(); ++k) {
            if (k || include_time) out.push_back(',');
            out += format_fixed(seq.at(t, k), decimals);
        }
        out.push_back('\n');
    }
    return out;
}

} // namespace speechshape
