#include "refscore/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "refscore/util.hpp"

namespace refscore {

namespace {

// Continued-fraction evaluation for the regularized incomplete beta
// function (modified Lentz method).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return h;
}

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double sample_sd(const std::vector<double>& values, double mean) {
    double ss = 0.0;
    for (double v : values) {
        double d = v - mean;
        ss += d * d;
    }
    return std::sqrt(ss / (static_cast<double>(values.size()) - 1.0));
}

// Uniform k-subset of {0..n-1} (distinct members) via partial Fisher-Yates.
std::vector<int> draw_subset(DeterministicRng& rng, int n, int k) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        auto j = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
    const auto n = values.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });

    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (Eigen::Index t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCategory::Analysis, "correlation inputs differ in length");
    }
    if (x.size() < 3) {
        throw Error(ErrorCategory::Analysis,
                    "correlation undefined for fewer than 3 pairs");
    }
    Eigen::VectorXd rx = average_ranks(x);
    Eigen::VectorXd ry = average_ranks(y);
    Eigen::VectorXd cx = rx.array() - rx.mean();
    Eigen::VectorXd cy = ry.array() - ry.mean();
    double vx = cx.squaredNorm();
    double vy = cy.squaredNorm();
    if (vx == 0.0 || vy == 0.0) {
        throw Error(ErrorCategory::Analysis,
                    "correlation undefined: zero rank variance");
    }
    double r = cx.dot(cy) / std::sqrt(vx * vy);
    return std::clamp(r, -1.0, 1.0);
}

double spearman(const std::vector<std::optional<double>>& x,
                const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCategory::Analysis, "correlation inputs differ in length");
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!x[i]) continue;
        xs.push_back(*x[i]);
        ys.push_back(y[i]);
    }
    Eigen::VectorXd vx = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    Eigen::VectorXd vy = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return spearman(vx, vy);
}

double student_t_cdf(double t, double df) {
    if (df <= 0.0) {
        throw Error(ErrorCategory::Analysis, "t distribution needs df > 0");
    }
    if (t == 0.0) return 0.5;
    double x = df / (df + t * t);
    double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorCategory::Analysis, "t quantile needs p in (0,1)");
    }
    if (df <= 0.0) {
        throw Error(ErrorCategory::Analysis, "t distribution needs df > 0");
    }
    if (p == 0.5) return 0.0;
    double q = p > 0.5 ? p : 1.0 - p;

    double hi = 1.0;
    while (student_t_cdf(hi, df) < q && hi < 1e12) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < q) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double t = 0.5 * (lo + hi);
    return p > 0.5 ? t : -t;
}

std::optional<std::pair<double, double>> t_ci(double mean, double sd, int count,
                                              double level) {
    if (count < 2) return std::nullopt;
    if (sd < 0.0) {
        throw Error(ErrorCategory::Analysis, "negative standard deviation");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw Error(ErrorCategory::Analysis, "confidence level must be in (0,1)");
    }
    double t = t_quantile((1.0 + level) / 2.0, static_cast<double>(count - 1));
    double half = t * sd;
    return std::make_pair(mean - half, mean + half);
}

double mad(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
    if (predicted.size() != actual.size()) {
        throw Error(ErrorCategory::Analysis, "deviation inputs differ in length");
    }
    if (predicted.size() < 1) {
        throw Error(ErrorCategory::Analysis, "deviation needs at least one pair");
    }
    return (predicted - actual).cwiseAbs().mean();
}

double improvement(double model_mad, double baseline_mad) {
    if (baseline_mad <= 0.0) {
        throw Error(ErrorCategory::Analysis, "baseline deviation must be positive");
    }
    return 100.0 * (1.0 - model_mad / baseline_mad);
}

namespace {

// Slope/intercept by centered normal equations.
std::pair<double, double> line_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    Eigen::VectorXd cx = x.array() - x.mean();
    double vx = cx.squaredNorm();
    if (vx == 0.0) {
        throw Error(ErrorCategory::Analysis, "degenerate fit: zero variance in x");
    }
    double coefficient = cx.dot(Eigen::VectorXd(y.array() - y.mean())) / vx;
    double intercept = y.mean() - coefficient * x.mean();
    return {coefficient, intercept};
}

}  // namespace

CalibrationModel ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                         const OlsOptions& options) {
    if (x.size() != y.size()) {
        throw Error(ErrorCategory::Analysis, "regression inputs differ in length");
    }
    if (x.size() < 3) {
        throw Error(ErrorCategory::Analysis, "regression needs at least 3 points");
    }

    CalibrationModel model;
    auto [coefficient, intercept] = line_fit(x, y);
    model.coefficient = coefficient;
    model.intercept = intercept;

    Eigen::VectorXd calibrated(x.size());
    if (options.leave_one_out) {
        if (x.size() < 4) {
            throw Error(ErrorCategory::Analysis,
                        "leave-one-out regression needs at least 4 points");
        }
        Eigen::VectorXd rx(x.size() - 1);
        Eigen::VectorXd ry(y.size() - 1);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Eigen::Index at = 0;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                if (j == i) continue;
                rx[at] = x[j];
                ry[at] = y[j];
                ++at;
            }
            auto [c, b] = line_fit(rx, ry);
            calibrated[i] = c * x[i] + b;
        }
    } else {
        calibrated = coefficient * x.array() + intercept;
    }
    if (options.round_predictions) {
        for (Eigen::Index i = 0; i < calibrated.size(); ++i) {
            calibrated[i] = round_half_up(calibrated[i], 0);
        }
    }

    Eigen::VectorXd baseline = Eigen::VectorXd::Constant(y.size(), y.mean());
    model.mad = mad(calibrated, y);
    model.direct_mad = mad(x, y);
    model.baseline_mad = mad(baseline, y);
    if (model.baseline_mad > 0.0) {
        model.improvement = 1.0 - model.mad / model.baseline_mad;
        model.direct_improvement = 1.0 - model.direct_mad / model.baseline_mad;
    }
    return model;
}

CorrelationCurve correlation_curve(const ScoreMatrix& matrix, std::uint64_t seed,
                                   const CurveOptions& options) {
    const int n = matrix.iterations;
    if (n < 4) {
        throw Error(ErrorCategory::Analysis,
                    "iteration curve needs at least 4 iterations");
    }
    if (options.sample_count < 1) {
        throw Error(ErrorCategory::Analysis, "curve sample count must be positive");
    }

    const auto articles = matrix.article_count();
    CorrelationCurve curve;

    for (int k = 1; k <= n; ++k) {
        // Subset generation per k; precedence when ranges touch at small n:
        // full set, then singles, then leave-one-out, then ordered pairs.
        std::vector<std::vector<int>> subsets;
        if (k == n) {
            std::vector<int> all(n);
            std::iota(all.begin(), all.end(), 0);
            subsets.push_back(std::move(all));
        } else if (k == 1) {
            for (int i = 0; i < n; ++i) subsets.push_back({i});
        } else if (k == n - 1) {
            for (int skip = 0; skip < n; ++skip) {
                std::vector<int> subset;
                subset.reserve(n - 1);
                for (int i = 0; i < n; ++i) {
                    if (i != skip) subset.push_back(i);
                }
                subsets.push_back(std::move(subset));
            }
        } else if (k == 2 || k == n - 2) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    if (i == j) continue;
                    if (k == 2) {
                        subsets.push_back({i, j});
                    } else {
                        std::vector<int> subset;
                        subset.reserve(n - 2);
                        for (int t = 0; t < n; ++t) {
                            if (t != i && t != j) subset.push_back(t);
                        }
                        subsets.push_back(std::move(subset));
                    }
                }
            }
        } else {
            DeterministicRng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
            for (int s = 0; s < options.sample_count; ++s) {
                subsets.push_back(draw_subset(rng, n, k));
            }
        }

        CurvePoint point;
        point.k = k;
        std::vector<double> correlations;
        correlations.reserve(subsets.size());
        for (const auto& subset : subsets) {
            std::vector<std::optional<double>> means(articles);
            for (std::size_t row = 0; row < articles; ++row) {
                means[row] = mean_over(matrix, row, subset);
            }
            try {
                correlations.push_back(spearman(means, matrix.human));
            } catch (const Error&) {
                ++point.excluded;
            }
        }

        point.samples = static_cast<int>(correlations.size());
        if (!correlations.empty()) {
            double mean = std::accumulate(correlations.begin(), correlations.end(), 0.0) /
                          static_cast<double>(correlations.size());
            point.mean = mean;
            if (k != n && correlations.size() >= 2) {
                double sd = sample_sd(correlations, mean);
                point.sd = sd;
                if (auto ci = t_ci(mean, sd, point.samples, options.confidence_level)) {
                    point.ci_low = ci->first;
                    point.ci_high = ci->second;
                }
            }
        }
        curve.points.push_back(std::move(point));
    }
    return curve;
}

std::string curve_to_csv(const CorrelationCurve& curve) {
    std::string out = "k,mean,sd,ci_low,ci_high,samples,excluded\n";
    for (const auto& p : curve.points) {
        out += std::to_string(p.k);
        out += ',';
        out += format_number(p.mean);
        out += ',';
        out += format_number(p.sd);
        out += ',';
        out += format_number(p.ci_low);
        out += ',';
        out += format_number(p.ci_high);
        out += ',';
        out += std::to_string(p.samples);
        out += ',';
        out += std::to_string(p.excluded);
        out += '\n';
    }
    return out;
}

void write_curve_csv(const CorrelationCurve& curve, const std::filesystem::path& path) {
    write_file_atomic(path, curve_to_csv(curve));
}

std::string calibration_to_csv(
    const std::vector<std::pair<std::string, CalibrationModel>>& rows) {
    std::string out =
        "cell,direct_mad,direct_improve,intercept,coefficient,"
        "regression_mad,regression_improve,baseline_mad\n";
    for (const auto& [label, model] : rows) {
        out += label;
        out += ',';
        out += format_number(model.direct_mad);
        out += ',';
        out += format_number(100.0 * model.direct_improvement);
        out += ',';
        out += format_number(model.intercept);
        out += ',';
        out += format_number(model.coefficient);
        out += ',';
        out += format_number(model.mad);
        out += ',';
        out += format_number(100.0 * model.improvement);
        out += ',';
        out += format_number(model.baseline_mad);
        out += '\n';
    }
    return out;
}

void write_calibration_csv(
    const std::vector<std::pair<std::string, CalibrationModel>>& rows,
    const std::filesystem::path& path) {
    write_file_atomic(path, calibration_to_csv(rows));
}

}  // namespace refscore
