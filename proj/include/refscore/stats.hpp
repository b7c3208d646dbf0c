#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "refscore/scorebook.hpp"

namespace refscore {

// Average ranks (1-based); tied values share the mean of their positions.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

// Spearman rank correlation: Pearson correlation of the rank vectors.
// Errors (Analysis) when fewer than 3 pairs remain or either rank vector
// has zero variance.
double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Pairwise-excluding overload: entries where x is absent are dropped.
double spearman(const std::vector<std::optional<double>>& x,
                const std::vector<double>& y);

// Student-t CDF and quantile (inverse CDF), via the regularized incomplete
// beta function. p in (0,1), df > 0.
double student_t_cdf(double t, double df);
double t_quantile(double p, double df);

// Two-sided confidence interval mean +/- t * sd where t is the two-sided
// t quantile at `level` with df = count-1. The spread statistic is the
// standard deviation of the samples, not a standard error. count < 2 has
// no interval.
std::optional<std::pair<double, double>> t_ci(double mean, double sd, int count,
                                              double level);

// Mean absolute deviation between two equal-length vectors.
double mad(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

// Percentage reduction in MAD against a baseline: 100 * (1 - model/baseline).
double improvement(double model_mad, double baseline_mad);

// Least-squares line y ~ coefficient * x + intercept with the derived
// accuracy measures. improvement fields are fractions (0.31 for a 31% cut).
struct CalibrationModel {
    double intercept = 0.0;
    double coefficient = 0.0;
    double mad = 0.0;            // calibrated predictions vs truth
    double direct_mad = 0.0;     // raw predictions vs truth
    double baseline_mad = 0.0;   // constant mean-of-truth predictor
    double improvement = 0.0;
    double direct_improvement = 0.0;

    double calibrate(double x) const { return coefficient * x + intercept; }
};

struct OlsOptions {
    // Evaluate MAD leave-one-out instead of on the training data.
    bool leave_one_out = false;
    // Round calibrated predictions half-up to whole numbers before MAD.
    bool round_predictions = false;
};

// Errors (Analysis) on fewer than 3 points or zero variance in x.
CalibrationModel ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                         const OlsOptions& options = {});

// One k of the iteration-averaging curve. mean/sd/ci are absent when no
// sample survives; sd and ci are also absent for the single k = n sample.
// excluded counts undefined correlations dropped from the sample.
struct CurvePoint {
    int k = 0;
    std::optional<double> mean;
    std::optional<double> sd;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    int samples = 0;
    int excluded = 0;
};

struct CorrelationCurve {
    std::vector<CurvePoint> points;  // k = 1..n in order
};

struct CurveOptions {
    double confidence_level = 0.95;
    int sample_count = 1000;  // draws per k in the sampled middle range
};

// Correlation between k-iteration average scores and the human scores, for
// every k. Subset scheme: k=1 single columns and k=n-1 leave-one-out are
// exhaustive (n each); k=2 and k=n-2 enumerate all n(n-1) ordered pairs;
// k=n is the single full average; remaining k draw sample_count random
// k-subsets from a generator seeded by (seed, k). Requires n >= 4 iterations.
CorrelationCurve correlation_curve(const ScoreMatrix& matrix, std::uint64_t seed,
                                   const CurveOptions& options = {});

std::string curve_to_csv(const CorrelationCurve& curve);
void write_curve_csv(const CorrelationCurve& curve, const std::filesystem::path& path);

// Calibration table, one labeled row per experiment cell, mirroring the
// Direct/Regression MAD summary layout. Improve columns are percentages.
std::string calibration_to_csv(
    const std::vector<std::pair<std::string, CalibrationModel>>& rows);
void write_calibration_csv(
    const std::vector<std::pair<std::string, CalibrationModel>>& rows,
    const std::filesystem::path& path);

}  // namespace refscore
