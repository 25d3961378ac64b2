// bcsm: command-line front end for the adaptive-filter experiments.
//
//   bcsm run --config FILE [--out DIR] [--seed N] [--trials N]
//   bcsm run --preset ar1_fig2
//   bcsm estimate-variance --config FILE
//   bcsm presets list
//   bcsm presets show NAME
//
// Exit codes: 0 ok, 1 configuration error, 2 runtime error.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcsm/config.hpp"
#include "bcsm/report.hpp"

#ifndef BCSM_PRESET_DIR
#define BCSM_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_runtime = 2;

struct CommonOptions {
    std::string config;
    std::string preset;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<unsigned> threads;
};

fs::path preset_dir(const std::string& override_dir) {
    if (!override_dir.empty()) return override_dir;
    if (const char* env = std::getenv("BCSM_PRESET_DIR")) return env;
    return BCSM_PRESET_DIR;
}

std::vector<std::string> list_presets(const fs::path& dir) {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            names.push_back(entry.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
    auto* cfg = cmd->add_option("--config", opt.config, "Experiment configuration (JSON)");
    auto* pre = cmd->add_option("--preset", opt.preset, "Name of a bundled preset");
    cfg->excludes(pre);
    cmd->add_option("--out", opt.out, "Output directory (overrides output_dir)");
    cmd->add_option("--seed", opt.seed, "Master seed (overrides seed)");
    cmd->add_option("--trials", opt.trials, "Number of trials (overrides trials)");
    cmd->add_option("--threads", opt.threads, "Worker threads, 0 = all cores");
}

bcsm::ExperimentConfig resolve_config(const CommonOptions& opt, const std::string& dir_override) {
    fs::path path;
    if (!opt.preset.empty()) {
        path = preset_dir(dir_override) / (opt.preset + ".json");
        if (!fs::exists(path)) throw bcsm::ConfigError("--preset", "no preset named '" + opt.preset + "'");
    } else if (!opt.config.empty()) {
        path = opt.config;
    } else {
        throw bcsm::ConfigError("--config", "one of --config or --preset is required");
    }
    bcsm::ExperimentConfig cfg = bcsm::load_config(path);
    if (opt.seed) {
        // A random system follows the master seed unless the file pinned one.
        const bool derived_system = cfg.system.random &&
                                    cfg.system.seed == bcsm::mix_seed(cfg.seed, bcsm::stream::system);
        cfg.seed = *opt.seed;
        if (derived_system) cfg.system.seed = bcsm::mix_seed(cfg.seed, bcsm::stream::system);
    }
    if (opt.trials) cfg.trials = *opt.trials;
    if (opt.threads) cfg.threads = *opt.threads;
    if (!opt.out.empty()) cfg.output_dir = opt.out;
    cfg.validate();
    return cfg;
}

int cmd_run(const CommonOptions& opt, const std::string& dir_override) {
    const auto cfg = resolve_config(opt, dir_override);
    const auto curves = bcsm::run_experiment(cfg);
    const auto files = bcsm::write_run_artifacts(cfg, curves, cfg.output_dir);
    for (const auto& c : curves)
        std::cout << c.label << ": steady_state_db=" << c.steady_state_db
                  << " update_ratio=" << c.update_ratio << " trials=" << c.trials << '\n';
    for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
    return exit_ok;
}

int cmd_estimate_variance(const CommonOptions& opt, const std::string& dir_override) {
    const auto cfg = resolve_config(opt, dir_override);
    const auto trace = bcsm::run_variance_estimation(cfg);
    const auto files = bcsm::write_variance_artifacts(cfg, trace, cfg.output_dir);
    std::cout << trace.label << ": final sigma_eta_hat=" << trace.final_estimate
              << " true=" << trace.true_variance << " relative_error=" << trace.relative_error()
              << '\n';
    for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bias-compensated set-membership NLMS experiments"};
    app.require_subcommand(1);
    std::string dir_override;
    app.add_option("--preset-dir", dir_override, "Directory holding preset JSON files");

    CommonOptions run_opt;
    auto* run = app.add_subcommand("run", "Run an ensemble and write learning curves");
    add_common(run, run_opt);

    CommonOptions est_opt;
    auto* est = app.add_subcommand("estimate-variance",
                                   "Trace the online regression-noise variance estimate");
    add_common(est, est_opt);

    auto* presets = app.add_subcommand("presets", "Inspect bundled presets");
    presets->require_subcommand(1);
    auto* plist = presets->add_subcommand("list", "List preset names");
    std::string show_name;
    auto* pshow = presets->add_subcommand("show", "Print a preset");
    pshow->add_option("name", show_name)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (run->parsed()) return cmd_run(run_opt, dir_override);
        if (est->parsed()) return cmd_estimate_variance(est_opt, dir_override);
        if (plist->parsed()) {
            for (const auto& n : list_presets(preset_dir(dir_override))) std::cout << n << '\n';
            return exit_ok;
        }
        if (pshow->parsed()) {
            const auto path = preset_dir(dir_override) / (show_name + ".json");
            std::ifstream in(path);
            if (!in) throw bcsm::ConfigError("name", "no preset named '" + show_name + "'");
            std::cout << in.rdbuf();
            return exit_ok;
        }
    } catch (const bcsm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_runtime;
}
