#ifndef BCSM_VARIANCE_ESTIMATOR_HPP
#define BCSM_VARIANCE_ESTIMATOR_HPP

// Online estimate of the regression-noise variance from the a-priori error.
//
// The error is soft-thresholded by tau to strip most of the output-noise
// contribution; its square then tracks sigma_eta^2 * ||w||^2. Both moments are
// exponentially weighted with forgetting factor beta, and the estimate is their
// ratio.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

#include "bcsm/filter_kernels.hpp"

namespace bcsm {

/// sign(e) * max(|e| - tau, 0)
inline double shrink_error(double error, double threshold) noexcept {
    return signum(error) * std::max(std::abs(error) - threshold, 0.0);
}

struct VarianceEstimatorConfig {
    double forgetting = 0.99;
    double threshold = 0.0;
    double wnorm_floor = 1e-6;

    void validate() const {
        if (!(forgetting >= 0.0 && forgetting < 1.0))
            throw std::invalid_argument("forgetting factor must lie in [0, 1)");
        if (!(threshold >= 0.0)) throw std::invalid_argument("shrinkage threshold must be >= 0");
        if (!(wnorm_floor > 0.0)) throw std::invalid_argument("weight-norm floor must be > 0");
    }
};

class VarianceEstimator {
public:
    explicit VarianceEstimator(const VarianceEstimatorConfig& cfg = {}) : cfg_(cfg) {
        cfg_.validate();
    }

    /// Resume from previously accumulated moments.
    VarianceEstimator(const VarianceEstimatorConfig& cfg, double ef2_average,
                      double wnorm_average, double estimate)
        : cfg_(cfg), ef2_avg_(ef2_average), wnorm_avg_(wnorm_average), estimate_(estimate) {
        cfg_.validate();
        if (!(ef2_avg_ >= 0.0 && wnorm_avg_ >= 0.0 && estimate_ >= 0.0))
            throw std::invalid_argument("estimator moments must be non-negative");
    }

    double update(double error, std::span<const double> weights) {
        if (!std::isfinite(error)) throw std::domain_error("non-finite error fed to variance estimator");
        double wnorm = 0.0;
        for (double w : weights) wnorm += w * w;
        if (!std::isfinite(wnorm))
            throw std::domain_error("non-finite weights fed to variance estimator");

        const double s = shrink_error(error, cfg_.threshold);
        const double beta = cfg_.forgetting;
        ef2_avg_ = beta * ef2_avg_ + (1.0 - beta) * (s * s);
        wnorm_avg_ = beta * wnorm_avg_ + (1.0 - beta) * wnorm;
        if (wnorm_avg_ > cfg_.wnorm_floor) estimate_ = ef2_avg_ / wnorm_avg_;
        return estimate_;
    }

    double estimate() const noexcept { return estimate_; }
    double ef2_average() const noexcept { return ef2_avg_; }
    double wnorm_average() const noexcept { return wnorm_avg_; }
    const VarianceEstimatorConfig& config() const noexcept { return cfg_; }

private:
    VarianceEstimatorConfig cfg_;
    double ef2_avg_ = 0.0;
    double wnorm_avg_ = 0.0;
    double estimate_ = 0.0;
};

}  // namespace bcsm

#endif  // BCSM_VARIANCE_ESTIMATOR_HPP
