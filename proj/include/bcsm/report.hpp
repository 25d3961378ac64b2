#ifndef BCSM_REPORT_HPP
#define BCSM_REPORT_HPP

// Experiment execution from an ExperimentConfig and the CSV / JSON artifacts
// it produces.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcsm/config.hpp"
#include "bcsm/harness.hpp"

namespace bcsm {

inline std::vector<LearningCurve> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto seeds = trial_seeds(cfg.seed, cfg.trials);
    return run_comparison(cfg.scenario(), cfg.algorithms, seeds, cfg.threads);
}

/// iteration,nmsd_db[,sigma_eta_hat]
inline void write_curve_csv(std::ostream& out, const LearningCurve& curve, bool with_variance) {
    out << "iteration,nmsd_db" << (with_variance ? ",sigma_eta_hat" : "") << '\n';
    for (std::size_t i = 0; i < curve.nmsd_db.size(); ++i) {
        out << i << ',' << format_double(curve.nmsd_db[i]);
        if (with_variance) out << ',' << format_double(curve.noise_variance[i]);
        out << '\n';
    }
}

inline nlohmann::json curve_summary(const LearningCurve& c) {
    nlohmann::json j = {{"kind", to_string(c.kind)},
                        {"trials", c.trials},
                        {"steady_state_db", c.steady_state_db},
                        {"final_nmsd_db", c.nmsd_db.back()},
                        {"update_ratio", c.update_ratio},
                        {"mean_sigma_eta2", c.mean_input_noise_variance},
                        {"mean_sigma_v2", c.mean_output_noise_variance}};
    if (c.kind == AlgorithmKind::bcsm_estimated || c.kind == AlgorithmKind::bcsm_known)
        j["final_sigma_eta_hat"] = c.final_noise_variance;
    return j;
}

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

inline void prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

}  // namespace detail

/// Writes <label>.csv per curve and summary.json; returns the written paths.
inline std::vector<std::filesystem::path> write_run_artifacts(const ExperimentConfig& cfg,
                                                              const std::vector<LearningCurve>& curves,
                                                              const std::filesystem::path& dir) {
    detail::prepare_dir(dir);
    std::vector<std::filesystem::path> written;
    nlohmann::json results = nlohmann::json::object();
    for (const auto& c : curves) {
        const auto path = dir / (c.label + ".csv");
        auto out = detail::open_artifact(path);
        write_curve_csv(out, c, c.kind == AlgorithmKind::bcsm_estimated);
        written.push_back(path);
        results[c.label] = curve_summary(c);
    }
    const auto summary_path = dir / "summary.json";
    auto out = detail::open_artifact(summary_path);
    out << nlohmann::json{{"config", config_to_json(cfg)}, {"results", results}}.dump(2) << '\n';
    written.push_back(summary_path);
    return written;
}

struct VarianceTrace {
    std::string label;
    std::vector<double> estimate;  // trial-mean sigma_eta_hat per iteration
    double true_variance = 0.0;    // trial-mean injected sigma_eta^2
    double final_estimate = 0.0;
    double clean_input_power = 0.0;
    std::size_t trials = 0;

    double relative_error() const {
        return true_variance > 0.0 ? (final_estimate - true_variance) / true_variance : 0.0;
    }
};

/// Runs the first bcsm_estimated algorithm of the configuration only.
inline VarianceTrace run_variance_estimation(const ExperimentConfig& cfg) {
    cfg.validate();
    const LabeledAlgorithm* chosen = nullptr;
    for (const auto& a : cfg.algorithms)
        if (a.spec.kind == AlgorithmKind::bcsm_estimated) {
            chosen = &a;
            break;
        }
    if (!chosen) throw ConfigError("algorithms", "no bcsm_estimated algorithm to run");

    const auto seeds = trial_seeds(cfg.seed, cfg.trials);
    const Scenario tmpl = resolve_input(cfg.scenario());
    auto curves = run_comparison(tmpl, std::span(chosen, 1), seeds, cfg.threads);

    double power = 0.0;
    for (auto s : seeds) {
        Scenario sc = tmpl;
        sc.seed = s;
        power += mean_power(synthesize_trial(sc).clean_input);
    }

    VarianceTrace t;
    t.label = chosen->label;
    t.estimate = std::move(curves.front().noise_variance);
    t.true_variance = curves.front().mean_input_noise_variance;
    t.final_estimate = t.estimate.back();
    t.clean_input_power = power / static_cast<double>(seeds.size());
    t.trials = seeds.size();
    return t;
}

/// Writes variance.csv (iteration,sigma_eta_hat,sigma_eta_true) and variance.json.
inline std::vector<std::filesystem::path> write_variance_artifacts(const ExperimentConfig& cfg,
                                                                   const VarianceTrace& trace,
                                                                   const std::filesystem::path& dir) {
    detail::prepare_dir(dir);
    const auto csv_path = dir / "variance.csv";
    {
        auto out = detail::open_artifact(csv_path);
        out << "iteration,sigma_eta_hat,sigma_eta_true\n";
        const std::string truth = format_double(trace.true_variance);
        for (std::size_t i = 0; i < trace.estimate.size(); ++i)
            out << i << ',' << format_double(trace.estimate[i]) << ',' << truth << '\n';
    }
    const auto json_path = dir / "variance.json";
    auto out = detail::open_artifact(json_path);
    out << nlohmann::json{{"config", config_to_json(cfg)},
                          {"label", trace.label},
                          {"trials", trace.trials},
                          {"final_sigma_eta_hat", trace.final_estimate},
                          {"true_sigma_eta2", trace.true_variance},
                          {"relative_error", trace.relative_error()},
                          {"clean_input_power", trace.clean_input_power}}
                .dump(2)
        << '\n';
    return {csv_path, json_path};
}

}  // namespace bcsm

#endif  // BCSM_REPORT_HPP
