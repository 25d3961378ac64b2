#ifndef BCSM_FILTER_KERNELS_HPP
#define BCSM_FILTER_KERNELS_HPP

// Per-sample update rules for NLMS, set-membership NLMS and bias-compensated
// set-membership NLMS. All three operate on a FilterState in place.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcsm {

// How the error bound enters the update magnitude once |e| > gamma.
//   literal:   alpha(e) = e - gamma
//   symmetric: alpha(e) = e - gamma * sign(e)
enum class BoundMode { literal, symmetric };

inline const char* to_string(BoundMode mode) {
    return mode == BoundMode::literal ? "literal" : "symmetric";
}

/// sign(0) == 0.
inline double signum(double v) noexcept {
    return static_cast<double>((v > 0.0) - (v < 0.0));
}

struct FilterConfig {
    std::size_t length = 16;
    double step_size = 1.0;
    double error_bound = 0.0;
    double regularizer = 1e-8;
    BoundMode bound_mode = BoundMode::symmetric;

    void validate() const {
        if (length < 1) throw std::invalid_argument("filter length must be >= 1");
        if (!(step_size > 0.0)) throw std::invalid_argument("step size must be > 0");
        if (!(error_bound >= 0.0)) throw std::invalid_argument("error bound must be >= 0");
        if (!(regularizer > 0.0)) throw std::invalid_argument("regularizer must be > 0");
    }
};

struct FilterState {
    std::vector<double> weights;
    FilterConfig config;

    /// Zero-initialised weights.
    static FilterState zeros(const FilterConfig& cfg) {
        cfg.validate();
        return FilterState{std::vector<double>(cfg.length, 0.0), cfg};
    }

    static FilterState with_weights(const FilterConfig& cfg, std::vector<double> w) {
        cfg.validate();
        if (w.size() != cfg.length)
            throw std::invalid_argument("weight vector length " + std::to_string(w.size()) +
                                        " does not match filter length " +
                                        std::to_string(cfg.length));
        return FilterState{std::move(w), cfg};
    }
};

struct StepOutcome {
    double error = 0.0;
    bool updated = false;
    bool compensation_applied = false;
};

namespace detail {

inline void check_dimension(const FilterState& state, std::span<const double> regressor) {
    if (regressor.size() != state.weights.size())
        throw std::invalid_argument("regressor length " + std::to_string(regressor.size()) +
                                    " does not match filter length " +
                                    std::to_string(state.weights.size()));
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double regularized_energy(const FilterState& state, std::span<const double> regressor) {
    return dot(regressor, regressor) + state.config.regularizer;
}

inline void check_finite(const FilterState& state) {
    for (double w : state.weights)
        if (!std::isfinite(w)) throw std::domain_error("adaptive filter weights became non-finite");
}

inline double bound_term(const FilterConfig& cfg, double error) noexcept {
    return cfg.bound_mode == BoundMode::literal ? cfg.error_bound
                                                : cfg.error_bound * signum(error);
}

}  // namespace detail

/// e = d - x^T w
inline double compute_error(const FilterState& state, std::span<const double> regressor,
                            double desired) {
    detail::check_dimension(state, regressor);
    return desired - detail::dot(regressor, state.weights);
}

inline StepOutcome nlms_step(FilterState& state, std::span<const double> regressor,
                             double desired) {
    const double e = compute_error(state, regressor, desired);
    const double gain = state.config.step_size * e / detail::regularized_energy(state, regressor);
    for (std::size_t i = 0; i < state.weights.size(); ++i) state.weights[i] += gain * regressor[i];
    detail::check_finite(state);
    return {e, true, false};
}

inline StepOutcome sm_nlms_step(FilterState& state, std::span<const double> regressor,
                                double desired) {
    const double e = compute_error(state, regressor, desired);
    const FilterConfig& cfg = state.config;
    if (!(std::abs(e) > cfg.error_bound)) return {e, false, false};

    const double alpha = e - detail::bound_term(cfg, e);
    const double gain = cfg.step_size * alpha / detail::regularized_energy(state, regressor);
    for (std::size_t i = 0; i < state.weights.size(); ++i) state.weights[i] += gain * regressor[i];
    detail::check_finite(state);
    return {e, true, false};
}

/// xi = mu * s2 * w / (x^T x + eps) + mu * gamma * g(e) * x / (x^T x + eps)
/// with g(e) = 1 in literal mode and sign(e) in symmetric mode.
inline std::vector<double> bias_compensation_vector(const FilterState& state,
                                                    std::span<const double> regressor,
                                                    double error, double noise_variance) {
    detail::check_dimension(state, regressor);
    if (!(noise_variance >= 0.0))
        throw std::invalid_argument("regression noise variance must be >= 0");
    const FilterConfig& cfg = state.config;
    const double inv_energy = 1.0 / detail::regularized_energy(state, regressor);
    const double w_scale = cfg.step_size * noise_variance * inv_energy;
    const double x_scale = cfg.step_size * detail::bound_term(cfg, error) * inv_energy;

    std::vector<double> xi(state.weights.size());
    for (std::size_t i = 0; i < xi.size(); ++i)
        xi[i] = w_scale * state.weights[i] + x_scale * regressor[i];
    return xi;
}

inline StepOutcome bcsm_nlms_step(FilterState& state, std::span<const double> regressor,
                                  double desired, double noise_variance) {
    if (!(noise_variance >= 0.0))
        throw std::invalid_argument("regression noise variance must be >= 0");
    const double e = compute_error(state, regressor, desired);
    const FilterConfig& cfg = state.config;
    if (!(std::abs(e) > cfg.error_bound)) return {e, false, false};

    // Same arithmetic as bias_compensation_vector, fused to avoid a temporary.
    // Each xi[i] only reads w[i], so updating in place still uses w(n).
    const double energy = detail::regularized_energy(state, regressor);
    const double inv_energy = 1.0 / energy;
    const double w_scale = cfg.step_size * noise_variance * inv_energy;
    const double x_scale = cfg.step_size * detail::bound_term(cfg, e) * inv_energy;
    const double alpha = e - detail::bound_term(cfg, e);
    const double gain = cfg.step_size * alpha / energy;
    for (std::size_t i = 0; i < state.weights.size(); ++i) {
        const double xi = w_scale * state.weights[i] + x_scale * regressor[i];
        state.weights[i] += gain * regressor[i] + xi;
    }
    detail::check_finite(state);
    return {e, true, true};
}

}  // namespace bcsm

#endif  // BCSM_FILTER_KERNELS_HPP
