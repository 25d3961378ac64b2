#ifndef BCSM_CONFIG_HPP
#define BCSM_CONFIG_HPP

// JSON experiment configuration: parsing with key-path diagnostics and an
// echo of the fully defaulted configuration.
//
//   {
//     "name": "ar1_fig2", "trials": 100, "seed": 2017, "output_dir": "out",
//     "scenario": {
//       "length": 16, "samples": 20000,
//       "input": {"type": "ar1", "pole": 0.9, "drive_variance": 0.19},
//       "input_snr_db": 10, "output_snr_db": 30,
//       "system": {"type": "random", "seed": 1}
//     },
//     "algorithms": [
//       {"label": "sm_nlms", "kind": "sm_nlms", "step_size": 0.435,
//        "error_bound": {"sigma_v2_multiple": 5}}, ...
//     ]
//   }
//
// Thresholds (error_bound, estimator.threshold) are either a plain number or
// one of {"absolute": x}, {"sigma_v_multiple": k} (k * sigma_v) or
// {"sigma_v2_multiple": c} (sqrt(c * sigma_v^2)).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcsm/harness.hpp"
#include "bcsm/signal_lab.hpp"

namespace bcsm {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct SystemSpec {
    bool random = true;
    std::uint64_t seed = 0;
    std::vector<double> weights;  // used when !random
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::size_t length = 16;
    std::size_t samples = 20000;
    InputSpec input = Ar1Input{};
    double input_snr_db = 10.0;
    double output_snr_db = 30.0;
    SystemSpec system;
    std::vector<LabeledAlgorithm> algorithms;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    unsigned threads = 0;

    std::vector<double> system_weights() const {
        return system.random ? random_system(length, system.seed) : system.weights;
    }

    /// Template scenario for the ensemble (seed is replaced per trial).
    Scenario scenario() const {
        Scenario sc;
        sc.system = system_weights();
        sc.input = input;
        sc.input_snr_db = input_snr_db;
        sc.output_snr_db = output_snr_db;
        sc.samples = samples;
        sc.seed = seed;
        return sc;
    }

    void validate() const {
        if (trials < 1) throw ConfigError("trials", "trials must be ≥ 1");
        if (length < 1) throw ConfigError("scenario.length", "length must be ≥ 1");
        if (samples < length) throw ConfigError("scenario.samples", "samples must be ≥ length");
        if (!system.random && system.weights.size() != length)
            throw ConfigError("scenario.system.weights", "must have exactly `length` entries");
        if (algorithms.empty()) throw ConfigError("algorithms", "at least one algorithm is required");
        std::set<std::string> labels;
        for (std::size_t i = 0; i < algorithms.size(); ++i) {
            const auto key = "algorithms[" + std::to_string(i) + "]";
            if (algorithms[i].label.empty()) throw ConfigError(key + ".label", "must not be empty");
            if (!labels.insert(algorithms[i].label).second)
                throw ConfigError(key + ".label", "duplicate label '" + algorithms[i].label + "'");
            try {
                algorithms[i].spec.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, e.what());
            }
        }
        if (const auto* fi = std::get_if<FileInput>(&input); fi && !std::filesystem::exists(fi->path))
            throw ConfigError("scenario.input.path", "sample file '" + fi->path.string() + "' does not exist");
        try {
            Scenario sc;
            sc.system.assign(length, 1.0);
            sc.input = input;
            sc.samples = samples;
            sc.input_snr_db = input_snr_db;
            sc.output_snr_db = output_snr_db;
            sc.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("scenario", e.what());
        }
    }
};

namespace detail {

using nlohmann::json;

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }
    ~Reader() = default;

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    bool has(const std::string& k) const { return node_.contains(k); }

    const json& at(const std::string& k) {
        seen_.insert(k);
        if (!node_.contains(k)) throw ConfigError(key(k), "missing required key");
        return node_.at(k);
    }

    double number(const std::string& k) {
        const json& v = at(k);
        if (!v.is_number()) throw ConfigError(key(k), "expected a number");
        return v.get<double>();
    }
    double number_or(const std::string& k, double fallback) { return has(k) ? number(k) : fallback; }

    std::uint64_t unsigned_int(const std::string& k) {
        const json& v = at(k);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) throw ConfigError(key(k), "must be ≥ 0");
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        throw ConfigError(key(k), "expected a non-negative integer");
    }
    std::uint64_t unsigned_or(const std::string& k, std::uint64_t fallback) {
        return has(k) ? unsigned_int(k) : fallback;
    }

    std::string string(const std::string& k) {
        const json& v = at(k);
        if (!v.is_string()) throw ConfigError(key(k), "expected a string");
        return v.get<std::string>();
    }
    std::string string_or(const std::string& k, std::string fallback) {
        return has(k) ? string(k) : std::move(fallback);
    }

    void reject_unknown() const {
        for (const auto& item : node_.items())
            if (!seen_.count(item.key())) throw ConfigError(key(item.key()), "unknown key");
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

inline NoiseScaled parse_scaled(const json& v, const std::string& key) {
    if (v.is_number()) return NoiseScaled::absolute(v.get<double>());
    if (!v.is_object() || v.size() != 1)
        throw ConfigError(key, "expected a number or one of {absolute | sigma_v_multiple | sigma_v2_multiple}");
    const auto it = v.begin();
    const std::string name = it.key();
    const json& value = it.value();
    if (!value.is_number()) throw ConfigError(key + "." + name, "expected a number");
    const double x = value.get<double>();
    if (!(x >= 0.0)) throw ConfigError(key + "." + name, "must be ≥ 0");
    if (name == "absolute") return NoiseScaled::absolute(x);
    if (name == "sigma_v_multiple") return NoiseScaled::times_sigma_v(x);
    if (name == "sigma_v2_multiple") return NoiseScaled::sqrt_times_sigma_v2(x);
    throw ConfigError(key + "." + name, "unknown threshold form");
}

inline json scaled_to_json(const NoiseScaled& s) {
    switch (s.reference) {
        case NoiseScaled::Reference::absolute: return json{{"absolute", s.value}};
        case NoiseScaled::Reference::sigma_v: return json{{"sigma_v_multiple", s.value}};
        case NoiseScaled::Reference::sigma_v2: return json{{"sigma_v2_multiple", s.value}};
    }
    return json{};
}

inline double parse_snr(Reader& r, const std::string& k, double fallback) {
    if (!r.has(k)) return fallback;
    const json& v = r.at(k);
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "none")) return no_noise;
    if (!v.is_number()) throw ConfigError(r.key(k), "expected a number of dB or \"none\"");
    return v.get<double>();
}

inline json snr_to_json(double snr) {
    return std::isinf(snr) && snr > 0 ? json("none") : json(snr);
}

inline InputSpec parse_input(const json& node, const std::string& path,
                             const std::filesystem::path& base_dir) {
    Reader r(node, path);
    const std::string type = r.string("type");
    InputSpec spec;
    if (type == "ar1") {
        const double pole = r.number("pole");
        spec = Ar1Input{pole, r.number_or("drive_variance", 1.0 - pole * pole)};
    } else if (type == "white") {
        spec = WhiteInput{r.number_or("variance", 1.0)};
    } else if (type == "file") {
        std::filesystem::path p = r.string("path");
        if (p.is_relative()) p = base_dir / p;
        spec = FileInput{p.lexically_normal(), r.unsigned_or("channel", 0)};
    } else {
        throw ConfigError(r.key("type"), "unknown input type '" + type + "' (ar1 | white | file)");
    }
    r.reject_unknown();
    return spec;
}

inline json input_to_json(const InputSpec& spec) {
    return std::visit(
        [](const auto& in) -> json {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, Ar1Input>)
                return {{"type", "ar1"}, {"pole", in.pole}, {"drive_variance", in.drive_variance}};
            else if constexpr (std::is_same_v<T, WhiteInput>)
                return {{"type", "white"}, {"variance", in.variance}};
            else if constexpr (std::is_same_v<T, FileInput>)
                return {{"type", "file"}, {"path", in.path.string()}, {"channel", in.channel}};
            else
                return {{"type", "samples"}, {"count", in.samples ? in.samples->size() : 0}};
        },
        spec);
}

inline AlgorithmKind parse_kind(const std::string& s, const std::string& key) {
    if (s == "nlms") return AlgorithmKind::nlms;
    if (s == "sm_nlms") return AlgorithmKind::sm_nlms;
    if (s == "bcsm_known") return AlgorithmKind::bcsm_known;
    if (s == "bcsm_estimated") return AlgorithmKind::bcsm_estimated;
    throw ConfigError(key, "unknown algorithm kind '" + s +
                               "' (nlms | sm_nlms | bcsm_known | bcsm_estimated)");
}

inline LabeledAlgorithm parse_algorithm(const json& node, const std::string& path,
                                        std::size_t length) {
    Reader r(node, path);
    LabeledAlgorithm out;
    out.label = r.string("label");
    AlgorithmSpec& a = out.spec;
    a.kind = parse_kind(r.string("kind"), r.key("kind"));
    a.length = length;
    a.step_size = r.number("step_size");
    if (r.has("error_bound")) a.error_bound = parse_scaled(r.at("error_bound"), r.key("error_bound"));
    a.regularizer = r.number_or("regularizer", a.regularizer);
    const std::string mode = r.string_or("bound_mode", "symmetric");
    if (mode == "symmetric") a.bound_mode = BoundMode::symmetric;
    else if (mode == "literal") a.bound_mode = BoundMode::literal;
    else throw ConfigError(r.key("bound_mode"), "expected \"symmetric\" or \"literal\"");

    if (a.kind == AlgorithmKind::bcsm_known && r.has("known_variance")) {
        const json& v = r.at("known_variance");
        if (v.is_string() && v.get<std::string>() == "injected") {
            a.known_variance.reset();
        } else if (v.is_number()) {
            a.known_variance = v.get<double>();
        } else {
            throw ConfigError(r.key("known_variance"), "expected a number or \"injected\"");
        }
    }
    if (a.kind == AlgorithmKind::bcsm_estimated) {
        EstimatorSpec est;
        if (r.has("estimator")) {
            Reader e(r.at("estimator"), r.key("estimator"));
            est.forgetting = e.number_or("forgetting", est.forgetting);
            if (e.has("threshold")) est.threshold = parse_scaled(e.at("threshold"), e.key("threshold"));
            est.wnorm_floor = e.number_or("wnorm_floor", est.wnorm_floor);
            e.reject_unknown();
        }
        a.estimator = est;
    }
    r.reject_unknown();
    if (!(a.step_size > 0.0)) throw ConfigError(r.key("step_size"), "must be > 0");
    return out;
}

}  // namespace detail

/// Parses a configuration document. Relative file paths resolve against base_dir.
inline ExperimentConfig parse_config(const nlohmann::json& doc,
                                     const std::filesystem::path& base_dir = ".") {
    using detail::Reader;
    Reader root(doc, "");
    ExperimentConfig cfg;
    cfg.name = root.string_or("name", cfg.name);

    if (root.has("trials")) {
        const auto& t = root.at("trials");
        if (t.is_number_integer() && t.get<std::int64_t>() < 1)
            throw ConfigError("trials", "trials must be ≥ 1");
        cfg.trials = root.unsigned_int("trials");
    }
    cfg.seed = root.unsigned_or("seed", cfg.seed);
    cfg.output_dir = root.string_or("output_dir", cfg.output_dir.string());
    cfg.threads = static_cast<unsigned>(root.unsigned_or("threads", cfg.threads));

    Reader sc(root.at("scenario"), "scenario");
    cfg.length = sc.unsigned_int("length");
    cfg.samples = sc.unsigned_int("samples");
    cfg.input = detail::parse_input(sc.at("input"), "scenario.input", base_dir);
    cfg.input_snr_db = detail::parse_snr(sc, "input_snr_db", cfg.input_snr_db);
    cfg.output_snr_db = detail::parse_snr(sc, "output_snr_db", cfg.output_snr_db);
    cfg.system.seed = mix_seed(cfg.seed, stream::system);
    if (sc.has("system")) {
        Reader sys(sc.at("system"), "scenario.system");
        if (sys.has("weights")) {
            const auto& w = sys.at("weights");
            if (!w.is_array()) throw ConfigError(sys.key("weights"), "expected an array of numbers");
            cfg.system.random = false;
            for (const auto& v : w) {
                if (!v.is_number()) throw ConfigError(sys.key("weights"), "expected an array of numbers");
                cfg.system.weights.push_back(v.get<double>());
            }
        } else {
            const std::string type = sys.string_or("type", "random");
            if (type != "random") throw ConfigError(sys.key("type"), "expected \"random\" or explicit weights");
            cfg.system.seed = sys.unsigned_or("seed", cfg.system.seed);
        }
        sys.reject_unknown();
    }
    sc.reject_unknown();

    const auto& algos = root.at("algorithms");
    if (!algos.is_array()) throw ConfigError("algorithms", "expected an array");
    for (std::size_t i = 0; i < algos.size(); ++i)
        cfg.algorithms.push_back(
            detail::parse_algorithm(algos[i], "algorithms[" + std::to_string(i) + "]", cfg.length));
    root.reject_unknown();

    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", std::string("parse error: ") + e.what());
    }
    return parse_config(doc, path.parent_path().empty() ? "." : path.parent_path());
}

/// Every effective parameter, defaults included. Feeding this back through
/// parse_config reproduces the same experiment.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    using nlohmann::json;
    json system;
    if (cfg.system.random) system = {{"type", "random"}, {"seed", cfg.system.seed}};
    else system = {{"weights", cfg.system.weights}};

    json algos = json::array();
    for (const auto& la : cfg.algorithms) {
        const AlgorithmSpec& a = la.spec;
        json j = {{"label", la.label},
                  {"kind", to_string(a.kind)},
                  {"step_size", a.step_size},
                  {"error_bound", detail::scaled_to_json(a.error_bound)},
                  {"regularizer", a.regularizer},
                  {"bound_mode", to_string(a.bound_mode)}};
        if (a.kind == AlgorithmKind::bcsm_known)
            j["known_variance"] = a.known_variance ? json(*a.known_variance) : json("injected");
        if (a.estimator)
            j["estimator"] = {{"forgetting", a.estimator->forgetting},
                              {"threshold", detail::scaled_to_json(a.estimator->threshold)},
                              {"wnorm_floor", a.estimator->wnorm_floor}};
        algos.push_back(std::move(j));
    }
    return {{"name", cfg.name},
            {"trials", cfg.trials},
            {"seed", cfg.seed},
            {"output_dir", cfg.output_dir.string()},
            {"threads", cfg.threads},
            {"scenario",
             {{"length", cfg.length},
              {"samples", cfg.samples},
              {"input", detail::input_to_json(cfg.input)},
              {"input_snr_db", detail::snr_to_json(cfg.input_snr_db)},
              {"output_snr_db", detail::snr_to_json(cfg.output_snr_db)},
              {"system", system}}},
            {"algorithms", algos}};
}

}  // namespace bcsm

#endif  // BCSM_CONFIG_HPP
