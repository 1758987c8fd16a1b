#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "speechshape/alignment.hpp"
#include "speechshape/blendshape.hpp"
#include "speechshape/generator.hpp"
#include "speechshape/metrics.hpp"
#include "speechshape/phoneme.hpp"
#include "speechshape/smoothing.hpp"

namespace speechshape {

struct Logger {
    enum class Level { debug = 0, info = 1, warn = 2, error = 3 };
    Level min_level = Level::info;
    std::function<void(Level, const std::string&)> sink; // default: stderr

    void log(Level level, const std::string& message) const;
    void debug(const std::string& m) const { log(Level::debug, m); }
    void info(const std::string& m) const { log(Level::info, m); }
    void warn(const std::string& m) const { log(Level::warn, m); }
    void error(const std::string& m) const { log(Level::error, m); }

    static Level level_from_string(const std::string& s);
};

struct GeneratorConfig {
    enum class Mode { rule, remote };
    Mode mode = Mode::rule;
    std::string endpoint;
    std::string auth_token;
    double timeout_seconds = 30.0;
    int retries = 2;
    double backoff_base_seconds = 1.0;
    int concurrency = 4;
    int max_tokens = 4096;
    int frame_tolerance = 2;
};

struct PipelineConfig {
    std::string schema_path;
    std::string prior_table_path;
    std::string lexicon_en_path;
    std::string lexicon_zh_path;
    ChannelSchema schema;
    double fps = 30.0;
    Lang language = Lang::en;
    int decimals = 2;
    std::size_t max_segment_tokens = 24;
    double pad_seconds = 0.0;
    SmoothingConfig smoothing;
    GeneratorConfig generator;
    MetricsConfig metrics;
    std::string corpus_root;
    std::string output_root;

    // runtime flags (CLI)
    int jobs = 0; // 0 = hardware concurrency
    bool force = false;

    /// Load and validate; ${VAR} in string values interpolates from the
    /// environment, relative paths resolve against the config file location.
    static PipelineConfig load(const std::string& path);
};

/// One manifest line: the cross-stage unit contract. Artifact paths are
/// relative to the manifest's directory.
struct UnitRecord {
    std::string source_id;
    int unit_index = 0;
    std::string text;
    std::size_t token_begin = 0;
    std::size_t token_end = 0;
    double start = 0.0; // padded span, seconds in the source recording
    double end = 0.0;
    std::size_t frame_begin = 0;
    std::size_t frame_end = 0;
    double fps = 30.0;
    std::string language = "en";
    int expected_frames = 0;
    std::string audio_path;
    std::string phoneme_path;
    std::string coeff_path;

    nlohmann::json to_json() const;
    static UnitRecord from_json(const nlohmann::json& j);
};

std::vector<UnitRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<UnitRecord>& records);

nlohmann::json phoneme_sequence_to_json(const PhonemeSequence& seq);
PhonemeSequence phoneme_sequence_from_json(const nlohmann::json& j);

/// Write via temp file + rename so readers never observe partial content.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Subcommand entry points. Return process exit codes:
// 0 success, 1 partial failure, 2 invalid input/config.
int cmd_build_units(const PipelineConfig& config, const std::vector<std::string>& ids,
                    const Logger& log);
int cmd_generate(const PipelineConfig& config, const Logger& log);
int cmd_smooth(const PipelineConfig& config, const Logger& log);
int cmd_eval(const PipelineConfig& config, const std::string& pred_dir,
             const std::string& gt_dir, const Logger& log);
int cmd_inspect(const std::string& path, const PipelineConfig* config, const Logger& log);

} // namespace speechshape
