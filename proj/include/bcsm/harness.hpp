#ifndef BCSM_HARNESS_HPP
#define BCSM_HARNESS_HPP

// System-identification harness: single trials, seeded multi-trial ensembles,
// NMSD learning curves and update ratios.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bcsm/filter_kernels.hpp"
#include "bcsm/signal_lab.hpp"
#include "bcsm/variance_estimator.hpp"

namespace bcsm {

enum class AlgorithmKind { nlms, sm_nlms, bcsm_known, bcsm_estimated };

inline const char* to_string(AlgorithmKind kind) {
    switch (kind) {
        case AlgorithmKind::nlms: return "nlms";
        case AlgorithmKind::sm_nlms: return "sm_nlms";
        case AlgorithmKind::bcsm_known: return "bcsm_known";
        case AlgorithmKind::bcsm_estimated: return "bcsm_estimated";
    }
    return "?";
}

/// A threshold given absolutely or relative to the trial's output-noise level,
/// which is only known once the trial is synthesized.
struct NoiseScaled {
    enum class Reference {
        absolute,  // value
        sigma_v,   // value * sigma_v
        sigma_v2,  // sqrt(value * sigma_v^2)
    };
    double value = 0.0;
    Reference reference = Reference::absolute;

    static NoiseScaled absolute(double v) { return {v, Reference::absolute}; }
    static NoiseScaled times_sigma_v(double k) { return {k, Reference::sigma_v}; }
    static NoiseScaled sqrt_times_sigma_v2(double c) { return {c, Reference::sigma_v2}; }

    double resolve(double output_noise_variance) const {
        switch (reference) {
            case Reference::absolute: return value;
            case Reference::sigma_v: return value * std::sqrt(output_noise_variance);
            case Reference::sigma_v2: return std::sqrt(value * output_noise_variance);
        }
        return value;
    }
};

struct EstimatorSpec {
    double forgetting = 0.99;
    NoiseScaled threshold = NoiseScaled::times_sigma_v(1.0);
    double wnorm_floor = 1e-6;
};

struct AlgorithmSpec {
    AlgorithmKind kind = AlgorithmKind::sm_nlms;
    std::size_t length = 16;
    double step_size = 1.0;
    NoiseScaled error_bound = NoiseScaled::absolute(0.0);
    double regularizer = 1e-8;
    BoundMode bound_mode = BoundMode::symmetric;
    /// Required iff kind == bcsm_estimated.
    std::optional<EstimatorSpec> estimator;
    /// Used iff kind == bcsm_known. nullopt means the trial's injected variance.
    std::optional<double> known_variance;

    static AlgorithmSpec nlms(std::size_t length, double mu) {
        AlgorithmSpec a;
        a.kind = AlgorithmKind::nlms;
        a.length = length;
        a.step_size = mu;
        return a;
    }
    static AlgorithmSpec sm_nlms(std::size_t length, double mu, NoiseScaled gamma) {
        AlgorithmSpec a = nlms(length, mu);
        a.kind = AlgorithmKind::sm_nlms;
        a.error_bound = gamma;
        return a;
    }
    static AlgorithmSpec bcsm_known(std::size_t length, double mu, NoiseScaled gamma,
                                    std::optional<double> variance = std::nullopt) {
        AlgorithmSpec a = sm_nlms(length, mu, gamma);
        a.kind = AlgorithmKind::bcsm_known;
        a.known_variance = variance;
        return a;
    }
    static AlgorithmSpec bcsm_estimated(std::size_t length, double mu, NoiseScaled gamma,
                                        EstimatorSpec est = {}) {
        AlgorithmSpec a = sm_nlms(length, mu, gamma);
        a.kind = AlgorithmKind::bcsm_estimated;
        a.estimator = est;
        return a;
    }

    void validate() const {
        if (kind == AlgorithmKind::bcsm_estimated && !estimator)
            throw std::invalid_argument("bcsm_estimated requires estimator settings");
        if (kind != AlgorithmKind::bcsm_estimated && estimator)
            throw std::invalid_argument(std::string(to_string(kind)) +
                                        " does not take estimator settings");
        if (kind != AlgorithmKind::bcsm_known && known_variance)
            throw std::invalid_argument(std::string(to_string(kind)) +
                                        " does not take a known variance");
        if (kind == AlgorithmKind::nlms && error_bound.value != 0.0)
            throw std::invalid_argument("nlms does not take an error bound");
        if (known_variance && !(*known_variance >= 0.0))
            throw std::invalid_argument("known variance must be >= 0");
        if (!(error_bound.value >= 0.0)) throw std::invalid_argument("error bound must be >= 0");
        if (estimator) {
            if (!(estimator->threshold.value >= 0.0))
                throw std::invalid_argument("shrinkage threshold must be >= 0");
            VarianceEstimatorConfig{estimator->forgetting, 0.0, estimator->wnorm_floor}.validate();
        }
        filter_config(0.0).validate();
    }

    FilterConfig filter_config(double output_noise_variance) const {
        FilterConfig cfg;
        cfg.length = length;
        cfg.step_size = step_size;
        cfg.error_bound = error_bound.resolve(output_noise_variance);
        cfg.regularizer = regularizer;
        cfg.bound_mode = bound_mode;
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// Metrics

inline constexpr double nmsd_floor_db = -320.0;

inline double ratio_to_db(double ratio) noexcept {
    if (!(ratio > 0.0)) return nmsd_floor_db;
    return std::max(nmsd_floor_db, 10.0 * std::log10(ratio));
}

/// 10 log10(||w - w_o||^2 / ||w_o||^2), clamped at nmsd_floor_db.
inline double compute_nmsd(std::span<const double> weights, std::span<const double> system) {
    if (weights.size() != system.size())
        throw std::invalid_argument("weight and system lengths differ");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < system.size(); ++i) {
        const double d = weights[i] - system[i];
        num += d * d;
        den += system[i] * system[i];
    }
    if (!(den > 0.0)) throw std::invalid_argument("true system has zero norm");
    return ratio_to_db(num / den);
}

inline double compute_update_ratio(std::span<const std::uint8_t> updated) {
    if (updated.empty()) throw std::invalid_argument("update ratio of an empty series");
    std::size_t count = 0;
    for (auto u : updated) count += (u != 0);
    return static_cast<double>(count) / static_cast<double>(updated.size());
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
    /// ||w(n+1) - w_o||^2 after processing sample n.
    std::vector<double> deviation;
    std::vector<std::uint8_t> updated;
    std::vector<double> error;
    /// Regression-noise variance handed to the next step (0 for nlms/sm_nlms).
    std::vector<double> noise_variance;
    std::vector<double> final_weights;
    double system_energy = 0.0;
    double input_noise_variance = 0.0;
    double output_noise_variance = 0.0;
    double error_bound = 0.0;
    double threshold = 0.0;

    double update_ratio() const { return compute_update_ratio(updated); }
};

inline TrialRecord run_trial(const TrialSignals& signals, std::span<const double> system,
                             const AlgorithmSpec& algo) {
    algo.validate();
    if (algo.length != system.size())
        throw std::invalid_argument("algorithm length " + std::to_string(algo.length) +
                                    " does not match system length " +
                                    std::to_string(system.size()));
    const std::size_t n = signals.noisy_input.size();
    if (signals.desired.size() != n) throw std::invalid_argument("trial signal lengths differ");

    FilterState state = FilterState::zeros(algo.filter_config(signals.output_noise_variance));

    TrialRecord rec;
    rec.deviation.resize(n);
    rec.updated.resize(n);
    rec.error.resize(n);
    rec.noise_variance.resize(n);
    rec.input_noise_variance = signals.input_noise_variance;
    rec.output_noise_variance = signals.output_noise_variance;
    rec.error_bound = state.config.error_bound;
    for (double w : system) rec.system_energy += w * w;

    std::optional<VarianceEstimator> estimator;
    if (algo.kind == AlgorithmKind::bcsm_estimated) {
        VarianceEstimatorConfig ecfg;
        ecfg.forgetting = algo.estimator->forgetting;
        ecfg.threshold = algo.estimator->threshold.resolve(signals.output_noise_variance);
        ecfg.wnorm_floor = algo.estimator->wnorm_floor;
        estimator.emplace(ecfg);
        rec.threshold = ecfg.threshold;
    }
    const double known =
        algo.kind == AlgorithmKind::bcsm_known
            ? algo.known_variance.value_or(signals.input_noise_variance)
            : 0.0;

    // Tapped delay line [x(n), x(n-1), ..., x(n-L+1)], zero before the first sample.
    std::vector<double> regressor(algo.length, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_backward(regressor.begin(), regressor.end() - 1, regressor.end());
        regressor[0] = signals.noisy_input[i];
        const double d = signals.desired[i];

        StepOutcome out;
        double variance = 0.0;
        switch (algo.kind) {
            case AlgorithmKind::nlms: out = nlms_step(state, regressor, d); break;
            case AlgorithmKind::sm_nlms: out = sm_nlms_step(state, regressor, d); break;
            case AlgorithmKind::bcsm_known:
                variance = known;
                out = bcsm_nlms_step(state, regressor, d, variance);
                break;
            case AlgorithmKind::bcsm_estimated:
                // The step sees the estimate from the previous iteration; the
                // estimator then absorbs this error and the post-update weights.
                out = bcsm_nlms_step(state, regressor, d, estimator->estimate());
                variance = estimator->update(out.error, state.weights);
                break;
        }

        double dev = 0.0;
        for (std::size_t k = 0; k < system.size(); ++k) {
            const double diff = state.weights[k] - system[k];
            dev += diff * diff;
        }
        rec.deviation[i] = dev;
        rec.updated[i] = out.updated ? 1 : 0;
        rec.error[i] = out.error;
        rec.noise_variance[i] = variance;
    }
    rec.final_weights = std::move(state.weights);
    return rec;
}

inline TrialRecord run_trial(const Scenario& scenario, const AlgorithmSpec& algo) {
    const Scenario resolved = resolve_input(scenario);
    return run_trial(synthesize_trial(resolved), resolved.system, algo);
}

// ---------------------------------------------------------------------------
// Ensembles

struct LearningCurve {
    std::string label;
    AlgorithmKind kind = AlgorithmKind::nlms;
    /// 10 log10 of the trial-mean normalized squared deviation.
    std::vector<double> nmsd_db;
    /// Trial-mean regression-noise variance used by the filter.
    std::vector<double> noise_variance;
    double update_ratio = 0.0;
    double steady_state_db = 0.0;
    std::size_t trials = 0;
    double mean_input_noise_variance = 0.0;
    double mean_output_noise_variance = 0.0;
    double final_noise_variance = 0.0;
};

struct LabeledAlgorithm {
    std::string label;
    AlgorithmSpec spec;
};

/// Fraction of the curve averaged into steady_state_db.
inline constexpr double steady_state_fraction = 0.10;

inline double steady_state_mean(std::span<const double> nmsd_db) {
    if (nmsd_db.empty()) throw std::invalid_argument("steady state of an empty curve");
    const auto window = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(nmsd_db.size()) * steady_state_fraction));
    double acc = 0.0;
    for (std::size_t i = nmsd_db.size() - window; i < nmsd_db.size(); ++i) acc += nmsd_db[i];
    return acc / static_cast<double>(window);
}

/// Seed of trial `index` in an ensemble driven by `master`.
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(master, 0x747269616cULL), index);
}

inline std::vector<std::uint64_t> trial_seeds(std::uint64_t master, std::size_t trials) {
    std::vector<std::uint64_t> seeds(trials);
    for (std::size_t i = 0; i < trials; ++i) seeds[i] = trial_seed(master, i);
    return seeds;
}

namespace detail {

struct CurveAccumulator {
    std::vector<double> normalized_deviation;
    std::vector<double> noise_variance;
    double update_ratio = 0.0;
    double input_noise_variance = 0.0;
    double output_noise_variance = 0.0;

    explicit CurveAccumulator(std::size_t n) : normalized_deviation(n, 0.0), noise_variance(n, 0.0) {}

    void add(const TrialRecord& rec) {
        const double inv = 1.0 / rec.system_energy;
        for (std::size_t i = 0; i < rec.deviation.size(); ++i) {
            normalized_deviation[i] += rec.deviation[i] * inv;
            noise_variance[i] += rec.noise_variance[i];
        }
        update_ratio += rec.update_ratio();
        input_noise_variance += rec.input_noise_variance;
        output_noise_variance += rec.output_noise_variance;
    }
};

}  // namespace detail

/// Runs every algorithm on the same synthesized trials (one per seed) and
/// averages squared deviations across trials before taking the log.
///
/// Trials execute on up to `threads` workers (0 = hardware concurrency) in
/// fixed-size batches; each batch is summed in trial order, so the result is
/// bit-identical for any thread count.
inline std::vector<LearningCurve> run_comparison(const Scenario& scenario_template,
                                                 std::span<const LabeledAlgorithm> algorithms,
                                                 std::span<const std::uint64_t> seeds,
                                                 unsigned threads = 0) {
    if (seeds.empty()) throw std::invalid_argument("trials must be >= 1");
    if (algorithms.empty()) throw std::invalid_argument("at least one algorithm is required");
    const Scenario base = resolve_input(scenario_template);
    base.validate();
    for (const auto& a : algorithms) {
        a.spec.validate();
        if (a.spec.length != base.length())
            throw std::invalid_argument("algorithm '" + a.label + "' length does not match system");
    }

    const std::size_t n = base.samples;
    std::vector<detail::CurveAccumulator> acc(algorithms.size(), detail::CurveAccumulator(n));

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t batch = std::max<std::size_t>(8, 2 * threads);

    for (std::size_t start = 0; start < seeds.size(); start += batch) {
        const std::size_t count = std::min(batch, seeds.size() - start);
        std::vector<std::vector<TrialRecord>> slots(count);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;

        auto worker = [&] {
            for (std::size_t j; (j = next.fetch_add(1)) < count;) {
                try {
                    Scenario sc = base;
                    sc.seed = seeds[start + j];
                    const TrialSignals sig = synthesize_trial(sc);
                    slots[j].reserve(algorithms.size());
                    for (const auto& a : algorithms) slots[j].push_back(run_trial(sig, sc.system, a.spec));
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
        }
        if (failure) std::rethrow_exception(failure);

        for (std::size_t j = 0; j < count; ++j)
            for (std::size_t a = 0; a < algorithms.size(); ++a) acc[a].add(slots[j][a]);
    }

    const double inv_trials = 1.0 / static_cast<double>(seeds.size());
    std::vector<LearningCurve> curves;
    curves.reserve(algorithms.size());
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        LearningCurve c;
        c.label = algorithms[a].label;
        c.kind = algorithms[a].spec.kind;
        c.trials = seeds.size();
        c.nmsd_db.resize(n);
        c.noise_variance.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            c.nmsd_db[i] = ratio_to_db(acc[a].normalized_deviation[i] * inv_trials);
            c.noise_variance[i] = acc[a].noise_variance[i] * inv_trials;
        }
        c.update_ratio = acc[a].update_ratio * inv_trials;
        c.mean_input_noise_variance = acc[a].input_noise_variance * inv_trials;
        c.mean_output_noise_variance = acc[a].output_noise_variance * inv_trials;
        c.final_noise_variance = c.noise_variance.back();
        c.steady_state_db = steady_state_mean(c.nmsd_db);
        curves.push_back(std::move(c));
    }
    return curves;
}

inline LearningCurve run_ensemble(const Scenario& scenario_template, const AlgorithmSpec& algo,
                                  std::span<const std::uint64_t> seeds, unsigned threads = 0) {
    const LabeledAlgorithm one{to_string(algo.kind), algo};
    return std::move(run_comparison(scenario_template, std::span(&one, 1), seeds, threads).front());
}

inline LearningCurve run_ensemble(const Scenario& scenario_template, const AlgorithmSpec& algo,
                                  std::size_t trials, std::uint64_t master_seed,
                                  unsigned threads = 0) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    const auto seeds = trial_seeds(master_seed, trials);
    return run_ensemble(scenario_template, algo, seeds, threads);
}

}  // namespace bcsm

#endif  // BCSM_HARNESS_HPP
