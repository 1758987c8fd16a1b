#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "speechshape/pipeline.hpp"

using namespace speechshape;

int main(int argc, char** argv) {
    CLI::App app{"speechshape: audio-to-blendshape pipeline toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string log_level = "info";
    bool force = false;
    int jobs = 0;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_flag("--force", force, "overwrite existing outputs instead of skipping");
    app.add_option("--jobs", jobs, "worker pool size (0 = logical cores)");
    app.add_option("--log-level", log_level, "debug|info|warn|error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    auto* build = app.add_subcommand("build-units", "construct aligned units and the manifest");
    std::vector<std::string> ids;
    build->add_option("ids", ids, "recording ids (default: every recording in the corpus)");

    auto* generate = app.add_subcommand("generate", "predict coefficients per unit");
    auto* smooth = app.add_subcommand("smooth", "concatenate and smooth unit predictions");

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string pred_dir, gt_dir;
    eval->add_option("--pred", pred_dir, "prediction directory (default: <output>/final)");
    eval->add_option("--gt", gt_dir, "ground-truth directory (default: the corpus)");

    auto* inspect = app.add_subcommand("inspect", "validate and summarize an artifact");
    std::string inspect_path;
    inspect->add_option("path", inspect_path, "manifest, coefficient file, or report")->required();

    CLI11_PARSE(app, argc, argv);

    Logger log;
    try {
        log.min_level = Logger::level_from_string(log_level);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        PipelineConfig config;
        bool have_config = !config_path.empty();
        if (have_config) {
            config = PipelineConfig::load(config_path);
            config.force = force;
            config.jobs = jobs;
        }

        if (inspect->parsed())
            return cmd_inspect(inspect_path, have_config ? &config : nullptr, log);
        if (!have_config) {
            log.error("--config is required for this subcommand");
            return 2;
        }
        if (build->parsed()) return cmd_build_units(config, ids, log);
        if (generate->parsed()) return cmd_generate(config, log);
        if (smooth->parsed()) return cmd_smooth(config, log);
        if (eval->parsed()) return cmd_eval(config, pred_dir, gt_dir, log);
    } catch (const ConfigError& e) {
        log.error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log.error(e.what());
        return 1;
    }
    return 2;
}
