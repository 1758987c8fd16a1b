#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "speechshape/errors.hpp"

namespace speechshape {

/// Ordered, unique set of coefficient channel names. The default mouth
/// schema (33 channels) ships as a versioned JSON file under data/.
class ChannelSchema {
public:
    ChannelSchema() = default;
    explicit ChannelSchema(std::vector<std::string> names);

    static ChannelSchema from_json_text(const std::string& text);
    static ChannelSchema load(const std::string& path);

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t k) const { return names_[k]; }

    /// Index of a channel name, or npos when absent.
    std::size_t index_of(const std::string& name) const;
    bool has(const std::string& name) const { return index_of(name) != npos; }

    bool operator==(const ChannelSchema& other) const { return names_ == other.names_; }
    bool operator!=(const ChannelSchema& other) const { return !(*this == other); }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<std::string> names_;
};

/// Frame-major matrix of coefficients, shape (T, K), plus frame rate and schema.
struct BlendshapeSequence {
    ChannelSchema schema;
    double fps = 30.0;
    std::size_t frames = 0;
    std::vector<double> values; // frames * schema.size(), frame-major

    static BlendshapeSequence zeros(ChannelSchema schema, double fps, std::size_t frames);

    std::size_t channels() const { return schema.size(); }

    double at(std::size_t t, std::size_t k) const { return values[t * channels() + k]; }
    double& at(std::size_t t, std::size_t k) { return values[t * channels() + k]; }

    std::vector<double> channel(std::size_t k) const;
    void set_channel(std::size_t k, const std::vector<double>& data);

    /// True when every value lies in [0, 1].
    bool in_range() const;
};

enum class ParseMode { strict, recover };

struct ParseOutcome {
    BlendshapeSequence sequence;
    std::vector<std::string> warnings;
    ParseMode mode = ParseMode::strict;
};

/// Fixed-schema JSON serialization: one object, keys in schema order, each
/// mapping to an equal-length list of fixed-point numbers. Byte-deterministic.
std::string serialize_sequence(const BlendshapeSequence& seq, int decimals);

/// Parse generator output. Strict mode demands an exact schema match; recover
/// mode repairs what it can (zero-fill, truncate, clip) and records warnings.
ParseOutcome parse_sequence(const std::string& text, const ChannelSchema& schema,
                            ParseMode mode, double fps = 30.0);

/// Element-wise clamp to [0, 1]. Idempotent.
BlendshapeSequence clip_sequence(const BlendshapeSequence& seq);

/// CSV interchange: header row of channel names (optional leading `time`
/// column in seconds), one row per frame.
BlendshapeSequence read_csv(const std::string& text, const ChannelSchema& schema,
                            double fps_hint = 30.0);
std::string write_csv(const BlendshapeSequence& seq, int decimals = 6,
                      bool include_time = true);

} // namespace speechshape
