#include "speechshape/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "speechshape/text.hpp"
#include "speechshape/wav.hpp"

namespace speechshape {

namespace fs = std::filesystem;
using nlohmann::json;

void Logger::log(Level level, const std::string& message) const {
    if (level < min_level) return;
    if (sink) {
        sink(level, message);
        return;
    }
    static const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

Logger::Level Logger::level_from_string(const std::string& s) {
    if (s == "debug") return Level::debug;
    if (s == "info") return Level::info;
    if (s == "warn") return Level::warn;
    if (s == "error") return Level::error;
    throw ConfigError("unknown log level \"" + s + "\"");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write file: " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw Error("short write: " + tmp.string());
    }
    fs::rename(tmp, target);
}

namespace {

std::string resolve_path(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute()) return path.lexically_normal().string();
    return (base / path).lexically_normal().string();
}

/// Replace ${VAR} with the environment value (empty when unset) in every
/// string value of the parsed document.
void interpolate_env(json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        std::string out;
        std::size_t i = 0;
        while (i < s.size()) {
            if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
                auto close = s.find('}', i + 2);
                if (close != std::string::npos) {
                    std::string name = s.substr(i + 2, close - i - 2);
                    const char* value = std::getenv(name.c_str());
                    if (value) out += value;
                    i = close + 1;
                    continue;
                }
            }
            out.push_back(s[i]);
            ++i;
        }
        j = out;
    } else if (j.is_object() || j.is_array()) {
        for (auto& child : j) interpolate_env(child);
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

/// Ordered worker pool: runs fn(i) for i in [0, n) on up to `jobs` threads.
/// Exceptions are captured per item and rethrown as messages by callers.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned int workers = jobs > 0 ? static_cast<unsigned int>(jobs)
                                    : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned int>(workers, static_cast<unsigned int>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    interpolate_env(j);
    fs::path base = fs::path(path).parent_path();

    PipelineConfig cfg;
    try {
        cfg.schema_path = resolve_path(base, j.at("schema").get<std::string>());
        cfg.prior_table_path = resolve_path(base, j.at("prior_table").get<std::string>());
        cfg.lexicon_en_path = resolve_path(base, j.value("lexicon_en", ""));
        cfg.lexicon_zh_path = resolve_path(base, j.value("lexicon_zh", ""));
        cfg.fps = j.value("fps", 30.0);
        cfg.language = lang_from_string(j.value("language", "en"));
        cfg.decimals = j.value("decimals", 2);
        if (j.contains("segmentation")) {
            cfg.max_segment_tokens = j["segmentation"].value("max_tokens", cfg.max_segment_tokens);
            cfg.pad_seconds = j["segmentation"].value("pad_seconds", cfg.pad_seconds);
        }
        if (j.contains("smoothing")) {
            const auto& s = j["smoothing"];
            cfg.smoothing.dead_zone_eps = s.value("dead_zone_eps", cfg.smoothing.dead_zone_eps);
            cfg.smoothing.gaussian_sigma = s.value("gaussian_sigma", cfg.smoothing.gaussian_sigma);
            cfg.smoothing.sg_window = s.value("sg_window", cfg.smoothing.sg_window);
            cfg.smoothing.sg_order = s.value("sg_order", cfg.smoothing.sg_order);
            cfg.smoothing.crossfade_frames = s.value("crossfade_frames", cfg.smoothing.crossfade_frames);
        }
        if (j.contains("generator")) {
            const auto& g = j["generator"];
            std::string mode = g.value("mode", "rule");
            if (mode == "rule") cfg.generator.mode = GeneratorConfig::Mode::rule;
            else if (mode == "remote") cfg.generator.mode = GeneratorConfig::Mode::remote;
            else throw ConfigError("unknown generator mode \"" + mode + "\"");
            cfg.generator.endpoint = g.value("endpoint", "");
            cfg.generator.auth_token = g.value("auth_token", "");
            cfg.generator.timeout_seconds = g.value("timeout_seconds", cfg.generator.timeout_seconds);
            cfg.generator.retries = g.value("retries", cfg.generator.retries);
            cfg.generator.backoff_base_seconds =
                g.value("backoff_base_seconds", cfg.generator.backoff_base_seconds);
            cfg.generator.concurrency = g.value("concurrency", cfg.generator.concurrency);
            cfg.generator.max_tokens = g.value("max_tokens", cfg.generator.max_tokens);
            cfg.generator.frame_tolerance = g.value("frame_tolerance", cfg.generator.frame_tolerance);
        }
        if (j.contains("metrics")) cfg.metrics = MetricsConfig::from_json(j["metrics"]);
        cfg.corpus_root = resolve_path(base, j.at("paths").at("corpus_root").get<std::string>());
        cfg.output_root = resolve_path(base, j.at("paths").at("output_root").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }

    require_file(cfg.schema_path, "schema file");
    require_file(cfg.prior_table_path, "prior table");
    if (!cfg.lexicon_en_path.empty()) require_file(cfg.lexicon_en_path, "en lexicon");
    if (!cfg.lexicon_zh_path.empty()) require_file(cfg.lexicon_zh_path, "zh lexicon");
    require_file(cfg.corpus_root, "corpus root");
    cfg.schema = ChannelSchema::load(cfg.schema_path);
    cfg.smoothing.validate();
    if (cfg.decimals < 1 || cfg.decimals > 6) throw ConfigError("decimals must be in [1, 6]");
    if (cfg.fps <= 0.0) throw ConfigError("fps must be > 0");
    if (cfg.generator.mode == GeneratorConfig::Mode::remote && cfg.generator.endpoint.empty())
        throw ConfigError("generator.endpoint required in remote mode");
    return cfg;
}

json UnitRecord::to_json() const {
    return {{"source_id", source_id},
            {"unit_index", unit_index},
            {"text", text},
            {"token_begin", token_begin},
            {"token_end", token_end},
            {"start", start},
            {"end", end},
            {"frame_begin", frame_begin},
            {"frame_end", frame_end},
            {"fps", fps},
            {"language", language},
            {"expected_frames", expected_frames},
            {"audio", audio_path},
            {"phonemes", phoneme_path},
            {"coeffs", coeff_path}};
}

UnitRecord UnitRecord::from_json(const json& j) {
    UnitRecord r;
    r.source_id = j.at("source_id").get<std::string>();
    r.unit_index = j.at("unit_index").get<int>();
    r.text = j.at("text").get<std::string>();
    r.token_begin = j.at("token_begin").get<std::size_t>();
    r.token_end = j.at("token_end").get<std::size_t>();
    r.start = j.at("start").get<double>();
    r.end = j.at("end").get<double>();
    r.frame_begin = j.at("frame_begin").get<std::size_t>();
    r.frame_end = j.at("frame_end").get<std::size_t>();
    r.fps = j.at("fps").get<double>();
    r.language = j.at("language").get<std::string>();
    r.expected_frames = j.at("expected_frames").get<int>();
    r.audio_path = j.at("audio").get<std::string>();
    r.phoneme_path = j.at("phonemes").get<std::string>();
    r.coeff_path = j.at("coeffs").get<std::string>();
    return r;
}

std::vector<UnitRecord> read_manifest(const std::string& path) {
    std::vector<UnitRecord> records;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(UnitRecord::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void write_manifest(const std::string& path, const std::vector<UnitRecord>& records) {
    std::string out;
    for (const auto& r : records) out += r.to_json().dump() + "\n";
    atomic_write_file(path, out);
}

json phoneme_sequence_to_json(const PhonemeSequence& seq) {
    json items = json::array();
    for (std::size_t i = 0; i < seq.items.size(); ++i) {
        json item = {{"symbol", seq.items[i].symbol}};
        if (seq.has_spans()) {
            item["start"] = seq.spans[i].start;
            item["end"] = seq.spans[i].end;
        }
        items.push_back(std::move(item));
    }
    return {{"language", lang_to_string(seq.language)}, {"items", items}};
}

PhonemeSequence phoneme_sequence_from_json(const json& j) {
    PhonemeSequence seq;
    seq.language = lang_from_string(j.at("language").get<std::string>());
    bool all_timed = true;
    for (const auto& item : j.at("items")) {
        seq.items.push_back(make_phoneme(item.at("symbol").get<std::string>(), seq.language));
        if (item.contains("start") && item.contains("end")) {
            seq.spans.push_back({item["start"].get<double>(), item["end"].get<double>()});
        } else {
            all_timed = false;
        }
    }
    if (!all_timed) seq.spans.clear();
    return seq;
}

namespace {

std::vector<std::string> discover_recordings(const std::string& corpus_root) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(corpus_root)) {
        if (!entry.is_directory()) continue;
        if (fs::exists(entry.path() / "transcript.json")) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::string unit_stem(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "unit_%04d", index);
    return buf;
}

struct RecordingOutcome {
    std::string id;
    bool ok = false;
    std::string message;
    std::vector<UnitRecord> records;
    std::vector<DroppedSegment> drops;
};

BlendshapeSequence slice_frames(const BlendshapeSequence& full, std::size_t f0, std::size_t f1) {
    f1 = std::min(f1, full.frames);
    f0 = std::min(f0, f1);
    auto out = BlendshapeSequence::zeros(full.schema, full.fps, f1 - f0);
    std::copy(full.values.begin() + static_cast<std::ptrdiff_t>(f0 * full.channels()),
              full.values.begin() + static_cast<std::ptrdiff_t>(f1 * full.channels()),
              out.values.begin());
    return out;
}

std::vector<int> junction_overlaps(const std::vector<UnitRecord>& records) {
    std::vector<int> overlaps;
    for (std::size_t i = 1; i < records.size(); ++i) {
        auto prev_end = static_cast<long long>(records[i - 1].frame_end);
        auto next_begin = static_cast<long long>(records[i].frame_begin);
        overlaps.push_back(static_cast<int>(std::max(0LL, prev_end - next_begin)));
    }
    return overlaps;
}

std::map<std::string, std::vector<UnitRecord>> group_by_recording(
    const std::vector<UnitRecord>& records) {
    std::map<std::string, std::vector<UnitRecord>> grouped;
    for (const auto& r : records) grouped[r.source_id].push_back(r);
    for (auto& [id, group] : grouped) {
        std::sort(group.begin(), group.end(),
                  [](const UnitRecord& a, const UnitRecord& b) { return a.unit_index < b.unit_index; });
        (void)id;
    }
    return grouped;
}

} // namespace

int cmd_build_units(const PipelineConfig& config, const std::vector<std::string>& ids,
                    const Logger& log) {
    const fs::path out_root(config.output_root);
    const std::string manifest_path = (out_root / "manifest.jsonl").string();
    if (fs::exists(manifest_path) && !config.force) {
        log.info("manifest exists, skipping build-units (use --force to rebuild): " + manifest_path);
        return 0;
    }

    std::vector<std::string> recordings = ids.empty() ? discover_recordings(config.corpus_root) : ids;
    std::vector<RecordingOutcome> outcomes(recordings.size());

    Lexicon lexicon_en, lexicon_zh;
    if (!config.lexicon_en_path.empty()) lexicon_en = Lexicon::load(config.lexicon_en_path);
    if (!config.lexicon_zh_path.empty()) lexicon_zh = Lexicon::load(config.lexicon_zh_path);

    parallel_for(recordings.size(), config.jobs, [&](std::size_t idx) {
        RecordingOutcome& outcome = outcomes[idx];
        outcome.id = recordings[idx];
        const fs::path rec_dir = fs::path(config.corpus_root) / outcome.id;
        try {
            auto transcript = TimedTranscript::load((rec_dir / "transcript.json").string());
            auto coeffs = read_csv(read_file((rec_dir / "coeffs.csv").string()), config.schema,
                                   config.fps);
            std::string audio_bytes = read_file((rec_dir / "audio.wav").string());

            std::vector<std::string> segments;
            if (fs::exists(rec_dir / "segments.json")) {
                json segs = json::parse(read_file((rec_dir / "segments.json").string()));
                if (!segs.is_array()) throw Error("segments.json must be a JSON array");
                for (const auto& s : segs) segments.push_back(s.get<std::string>());
            } else {
                segments = naive_semantic_split(transcript, config.max_segment_tokens);
            }

            PhonemeSource source;
            source.lexicon = transcript.language == Lang::zh ? &lexicon_zh : &lexicon_en;
            if (fs::exists(rec_dir / "phonemes.json"))
                source.annotations = PhonemeAnnotations::load((rec_dir / "phonemes.json").string(),
                                                              transcript.language);

            auto built = build_units(transcript, segments, source, coeffs,
                                     {outcome.id, config.pad_seconds});
            outcome.drops = built.drops;

            const fs::path unit_dir = out_root / "units" / outcome.id;
            fs::create_directories(unit_dir);
            int index = 0;
            for (const auto& unit : built.units) {
                std::string stem = unit_stem(index);
                UnitRecord record;
                record.source_id = outcome.id;
                record.unit_index = index;
                record.text = unit.segment.text;
                record.token_begin = unit.segment.tokens.begin;
                record.token_end = unit.segment.tokens.end;
                record.start = unit.audio_span.start;
                record.end = unit.audio_span.end;
                record.frame_begin = unit.frame_begin;
                record.frame_end = unit.frame_end;
                record.fps = coeffs.fps;
                record.language = lang_to_string(transcript.language);
                record.expected_frames = static_cast<int>(unit.frame_end - unit.frame_begin);
                record.audio_path = "units/" + outcome.id + "/" + stem + ".wav";
                record.phoneme_path = "units/" + outcome.id + "/" + stem + ".phonemes.json";
                record.coeff_path = "units/" + outcome.id + "/" + stem + ".target.json";

                atomic_write_file((out_root / record.audio_path).string(),
                                  slice_audio(audio_bytes, unit.audio_span.start, unit.audio_span.end));
                atomic_write_file((out_root / record.phoneme_path).string(),
                                  phoneme_sequence_to_json(unit.phonemes).dump(2) + "\n");
                atomic_write_file((out_root / record.coeff_path).string(),
                                  serialize_sequence(unit.coefficients, config.decimals));
                outcome.records.push_back(std::move(record));
                ++index;
            }
            outcome.ok = true;
        } catch (const std::exception& e) {
            outcome.message = e.what();
        }
    });

    std::vector<UnitRecord> manifest;
    bool any_failed = false;
    for (const auto& outcome : outcomes) {
        if (!outcome.ok) {
            any_failed = true;
            log.error("recording " + outcome.id + " failed: " + outcome.message);
            continue;
        }
        log.info("recording " + outcome.id + ": " + std::to_string(outcome.records.size()) +
                 " units, " + std::to_string(outcome.drops.size()) + " dropped");
        for (const auto& d : outcome.drops)
            log.warn("recording " + outcome.id + " segment " + std::to_string(d.index) +
                     " dropped: " + d.reason);
        for (const auto& r : outcome.records) manifest.push_back(r);
    }
    write_manifest(manifest_path, manifest);
    log.info("wrote " + std::to_string(manifest.size()) + " units to " + manifest_path);
    return any_failed ? 1 : 0;
}

int cmd_generate(const PipelineConfig& config, const Logger& log) {
    const fs::path out_root(config.output_root);
    auto records = read_manifest((out_root / "manifest.jsonl").string());
    auto table = PriorTable::load(config.prior_table_path, config.schema);

    struct UnitOutcome {
        std::string status = "ok"; // ok | skipped | failed
        std::string error;
        double latency = 0.0;
        int attempts = 1;
        std::vector<std::string> warnings;
    };
    std::vector<UnitOutcome> outcomes(records.size());

    const bool remote = config.generator.mode == GeneratorConfig::Mode::remote;
    int jobs = remote ? config.generator.concurrency : config.jobs;

    parallel_for(records.size(), jobs, [&](std::size_t i) {
        const UnitRecord& record = records[i];
        UnitOutcome& outcome = outcomes[i];
        const fs::path pred_path =
            out_root / "pred" / record.source_id / (unit_stem(record.unit_index) + ".json");
        try {
            if (fs::exists(pred_path) && !config.force) {
                outcome.status = "skipped";
                return;
            }
            auto phonemes =
                phoneme_sequence_from_json(json::parse(read_file((out_root / record.phoneme_path).string())));
            BlendshapeSequence prediction;
            if (!remote) {
                prediction = generate_rule_based(phonemes, record.end - record.start,
                                                 record.expected_frames, table, record.fps,
                                                 &outcome.warnings);
            } else {
                GenerationRequest request;
                request.transcript = record.text;
                request.phonemes = phonemes;
                request.guidance = render_guidance_text(phonemes, table);
                request.audio_b64 = base64_encode(read_file((out_root / record.audio_path).string()));
                request.schema = config.schema;
                request.fps = record.fps;
                request.expected_frames = record.expected_frames;
                request.max_tokens = config.generator.max_tokens;

                RemoteConfig remote_cfg;
                remote_cfg.endpoint = config.generator.endpoint;
                remote_cfg.auth_token = config.generator.auth_token;
                remote_cfg.timeout_seconds = config.generator.timeout_seconds;
                remote_cfg.retries = config.generator.retries;
                remote_cfg.backoff_base_seconds = config.generator.backoff_base_seconds;
                remote_cfg.frame_tolerance = config.generator.frame_tolerance;

                auto response = generate_remote(request, remote_cfg);
                outcome.latency = response.latency_seconds;
                outcome.attempts = response.attempts;
                outcome.warnings = response.parsed.warnings;
                prediction = fit_frame_count(response.parsed.sequence, record.expected_frames,
                                             config.generator.frame_tolerance);
            }
            atomic_write_file(pred_path.string(), serialize_sequence(prediction, config.decimals));
        } catch (const std::exception& e) {
            outcome.status = "failed";
            outcome.error = e.what();
        }
    });

    json run_log = json::array();
    int failed = 0, skipped = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& o = outcomes[i];
        json entry = {{"unit", records[i].source_id + "/" + unit_stem(records[i].unit_index)},
                      {"status", o.status},
                      {"latency_seconds", o.latency},
                      {"attempts", o.attempts},
                      {"warnings", o.warnings}};
        if (!o.error.empty()) entry["error"] = o.error;
        run_log.push_back(std::move(entry));
        if (o.status == "failed") {
            ++failed;
            log.error("unit " + records[i].source_id + "/" + unit_stem(records[i].unit_index) +
                      " failed: " + o.error);
        } else if (o.status == "skipped") {
            ++skipped;
        }
    }
    json summary = {{"units", records.size()},
                    {"ok", records.size() - static_cast<std::size_t>(failed + skipped)},
                    {"failed", failed},
                    {"skipped", skipped},
                    {"entries", run_log}};
    atomic_write_file((out_root / "pred" / "run_log.json").string(), summary.dump(2) + "\n");
    log.info("generate: " + std::to_string(records.size() - static_cast<std::size_t>(failed)) +
             "/" + std::to_string(records.size()) + " units ok");
    return failed > 0 ? 1 : 0;
}

int cmd_smooth(const PipelineConfig& config, const Logger& log) {
    const fs::path out_root(config.output_root);
    auto grouped = group_by_recording(read_manifest((out_root / "manifest.jsonl").string()));

    std::vector<std::string> ids;
    for (const auto& [id, group] : grouped) { ids.push_back(id); (void)group; }
    std::vector<std::string> failures(ids.size());

    parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
        const std::string& id = ids[i];
        const auto& group = grouped.at(id);
        const fs::path final_path = out_root / "final" / (id + ".json");
        try {
            if (fs::exists(final_path) && !config.force) {
                log.info("final output exists, skipping " + id);
                return;
            }
            std::vector<BlendshapeSequence> segments;
            for (const auto& record : group) {
                fs::path pred = out_root / "pred" / record.source_id /
                                (unit_stem(record.unit_index) + ".json");
                if (!fs::exists(pred)) throw Error("missing unit prediction: " + pred.string());
                auto parsed = parse_sequence(read_file(pred.string()), config.schema,
                                             ParseMode::strict, record.fps);
                segments.push_back(fit_frame_count(parsed.sequence, record.expected_frames,
                                                   config.generator.frame_tolerance));
            }
            auto concatenated = concat_segments(segments, config.smoothing.crossfade_frames,
                                                junction_overlaps(group));
            std::vector<std::string> warnings;
            auto smoothed = smooth_pipeline(concatenated, config.smoothing, &warnings);
            for (const auto& w : warnings) log.warn("recording " + id + ": " + w);
            atomic_write_file(final_path.string(), serialize_sequence(smoothed, config.decimals));
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    int failed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (failures[i].empty()) continue;
        ++failed;
        log.error("recording " + ids[i] + " skipped: " + failures[i]);
    }
    log.info("smooth: " + std::to_string(ids.size() - static_cast<std::size_t>(failed)) + "/" +
             std::to_string(ids.size()) + " recordings ok");
    return failed > 0 ? 1 : 0;
}

int cmd_eval(const PipelineConfig& config, const std::string& pred_dir,
             const std::string& gt_dir, const Logger& log) {
    const fs::path out_root(config.output_root);
    auto grouped = group_by_recording(read_manifest((out_root / "manifest.jsonl").string()));
    const fs::path preds = pred_dir.empty() ? out_root / "final" : fs::path(pred_dir);

    std::vector<std::string> ids;
    for (const auto& [id, group] : grouped) { ids.push_back(id); (void)group; }
    std::vector<std::string> failures(ids.size());
    std::vector<MetricReport> reports(ids.size());

    auto load_side = [&](const fs::path& path, double fps) {
        if (path.extension() == ".csv") return read_csv(read_file(path.string()), config.schema, fps);
        auto outcome = parse_sequence(read_file(path.string()), config.schema, ParseMode::strict, fps);
        return outcome.sequence;
    };
    auto concat_like_pipeline = [&](const BlendshapeSequence& full,
                                    const std::vector<UnitRecord>& group) {
        std::vector<BlendshapeSequence> slices;
        for (const auto& r : group) slices.push_back(slice_frames(full, r.frame_begin, r.frame_end));
        return concat_segments(slices, config.smoothing.crossfade_frames, junction_overlaps(group));
    };
    // A side may arrive as the full recording timeline (gets sliced and
    // concatenated by the manifest spans) or as an already-concatenated
    // speaking-span sequence (used as-is). Distinguish by frame count.
    auto to_speaking_spans = [&](BlendshapeSequence side, const std::vector<UnitRecord>& group,
                                 std::size_t concat_frames, std::size_t max_frame_end,
                                 const std::string& what) {
        if (side.frames == concat_frames) return side;
        if (side.frames >= max_frame_end) return concat_like_pipeline(side, group);
        throw MetricError(what + " length " + std::to_string(side.frames) +
                          " matches neither the concatenated (" + std::to_string(concat_frames) +
                          ") nor the full timeline (>= " + std::to_string(max_frame_end) +
                          ") frame count");
    };

    parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
        const std::string& id = ids[i];
        const auto& group = grouped.at(id);
        try {
            fs::path gt_path;
            if (gt_dir.empty()) {
                gt_path = fs::path(config.corpus_root) / id / "coeffs.csv";
            } else {
                gt_path = fs::path(gt_dir) / (id + ".csv");
                if (!fs::exists(gt_path)) gt_path = fs::path(gt_dir) / (id + ".json");
            }
            if (!fs::exists(gt_path)) throw Error("no ground truth for recording " + id);
            fs::path pred_path = preds / (id + ".json");
            if (!fs::exists(pred_path)) pred_path = preds / (id + ".csv");
            if (!fs::exists(pred_path)) throw Error("no prediction for recording " + id);

            std::size_t concat_frames = 0, max_frame_end = 0;
            {
                std::size_t total = 0;
                for (const auto& r : group) {
                    total += r.frame_end - r.frame_begin;
                    max_frame_end = std::max(max_frame_end, r.frame_end);
                }
                std::size_t prev_len = group.front().frame_end - group.front().frame_begin;
                auto overlaps = junction_overlaps(group);
                std::size_t acc = prev_len;
                for (std::size_t jn = 0; jn + 1 < group.size(); ++jn) {
                    std::size_t next_len = group[jn + 1].frame_end - group[jn + 1].frame_begin;
                    auto blend = static_cast<std::size_t>(
                        std::max<int>(overlaps[jn],
                                      std::min<int>({config.smoothing.crossfade_frames,
                                                     static_cast<int>(acc), static_cast<int>(next_len)})));
                    acc += next_len - std::min(blend, std::min(acc, next_len));
                }
                concat_frames = acc;
                (void)total;
            }
            auto gt_cat = to_speaking_spans(load_side(gt_path, config.fps), group, concat_frames,
                                            max_frame_end, "ground truth");
            auto pred_cat = to_speaking_spans(load_side(pred_path, config.fps), group,
                                              concat_frames, max_frame_end, "prediction");
            reports[i] = evaluate(pred_cat, gt_cat, config.metrics);
            atomic_write_file((out_root / "reports" / (id + ".json")).string(),
                              reports[i].to_json().dump(2) + "\n");
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    json per_recording = json::object();
    double sum_mse = 0, sum_mae = 0, sum_fd = 0, sum_wind = 0, sum_wind_std = 0;
    int ok = 0, failed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!failures[i].empty()) {
            ++failed;
            log.error("recording " + ids[i] + " not evaluated: " + failures[i]);
            continue;
        }
        const auto& r = reports[i];
        per_recording[ids[i]] = r.to_json();
        sum_mse += r.mse;
        sum_mae += r.mae;
        sum_fd += r.fd;
        sum_wind += r.wind_mean;
        sum_wind_std += r.wind_std;
        ++ok;
        char line[160];
        std::snprintf(line, sizeof line, "%s: mse=%.6f mae=%.6f fd=%.6f wind=%.6f +/- %.6f",
                      ids[i].c_str(), r.mse, r.mae, r.fd, r.wind_mean, r.wind_std);
        log.info(line);
    }
    if (ok > 0) {
        json summary = {{"recordings", per_recording},
                        {"mean",
                         {{"mse", sum_mse / ok},
                          {"mae", sum_mae / ok},
                          {"fd", sum_fd / ok},
                          {"wind_mean", sum_wind / ok},
                          {"wind_std", sum_wind_std / ok}}},
                        {"n_recordings", ok}};
        atomic_write_file((out_root / "reports" / "summary.json").string(), summary.dump(2) + "\n");
        char line[160];
        std::snprintf(line, sizeof line, "corpus mean: mse=%.6f mae=%.6f fd=%.6f wind=%.6f",
                      sum_mse / ok, sum_mae / ok, sum_fd / ok, sum_wind / ok);
        log.info(line);
    }
    return failed > 0 ? 1 : 0;
}

int cmd_inspect(const std::string& path, const PipelineConfig* config, const Logger& log) {
    if (!fs::exists(path)) {
        log.error("no such file: " + path);
        return 2;
    }
    fs::path p(path);
    std::vector<std::string> violations;
    try {
        if (p.extension() == ".jsonl") {
            auto records = read_manifest(path);
            log.info("manifest with " + std::to_string(records.size()) + " units");
            double prev_start = -1.0;
            std::string prev_id;
            for (const auto& r : records) {
                if (r.source_id == prev_id && r.start < prev_start)
                    violations.push_back("unit " + r.source_id + "/" + std::to_string(r.unit_index) +
                                         " starts before its predecessor");
                prev_id = r.source_id;
                prev_start = r.start;
                if (r.frame_end < r.frame_begin)
                    violations.push_back("unit " + r.source_id + "/" + std::to_string(r.unit_index) +
                                         " has an inverted frame range");
                if (r.expected_frames != static_cast<int>(r.frame_end - r.frame_begin))
                    violations.push_back("unit " + r.source_id + "/" + std::to_string(r.unit_index) +
                                         " expected_frames disagrees with its frame range");
                for (const auto& rel : {r.audio_path, r.phoneme_path, r.coeff_path}) {
                    if (!fs::exists(p.parent_path() / rel))
                        violations.push_back("dangling artifact path: " + rel);
                }
            }
        } else if (p.extension() == ".csv") {
            if (!config) throw ConfigError("--config required to inspect coefficient files");
            auto seq = read_csv(read_file(path), config->schema, config->fps);
            log.info("coefficient CSV: " + std::to_string(seq.frames) + " frames x " +
                     std::to_string(seq.channels()) + " channels at " + std::to_string(seq.fps) +
                     " fps");
            if (!seq.in_range()) violations.push_back("values outside [0, 1]");
        } else if (p.extension() == ".json") {
            json j = json::parse(read_file(path));
            if (j.is_object() && j.contains("mse") && j.contains("fd")) {
                auto report = MetricReport::from_json(j);
                char line[160];
                std::snprintf(line, sizeof line,
                              "metric report: mse=%.6f mae=%.6f fd=%.6f wind=%.6f +/- %.6f (%zu frames)",
                              report.mse, report.mae, report.fd, report.wind_mean, report.wind_std,
                              report.n_frames);
                log.info(line);
                for (double v : {report.mse, report.mae, report.fd, report.wind_mean})
                    if (!(v >= 0.0) || !std::isfinite(v))
                        violations.push_back("metric value negative or non-finite");
            } else if (j.is_object()) {
                if (!config) throw ConfigError("--config required to inspect coefficient files");
                auto outcome = parse_sequence(read_file(path), config->schema, ParseMode::recover,
                                              config->fps);
                double lo = 1.0, hi = 0.0;
                json raw = j;
                bool out_of_range = false;
                for (const auto& [key, arr] : raw.items()) {
                    (void)key;
                    if (!arr.is_array()) continue;
                    for (const auto& v : arr) {
                        if (!v.is_number()) continue;
                        double x = v.get<double>();
                        lo = std::min(lo, x);
                        hi = std::max(hi, x);
                        if (x < 0.0 || x > 1.0) out_of_range = true;
                    }
                }
                log.info("coefficient JSON: " + std::to_string(outcome.sequence.frames) +
                         " frames x " + std::to_string(outcome.sequence.channels()) +
                         " channels, value range [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
                if (out_of_range) violations.push_back("values outside [0, 1]");
                for (const auto& w : outcome.warnings) violations.push_back(w);
            } else {
                log.error("unrecognized JSON document");
                return 2;
            }
        } else {
            log.error("unknown file type: " + path);
            return 2;
        }
    } catch (const ConfigError& e) {
        log.error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log.error(std::string("inspect failed: ") + e.what());
        return 1;
    }
    for (const auto& v : violations) log.warn("violation: " + v);
    return violations.empty() ? 0 : 1;
}

} // namespace speechshape
