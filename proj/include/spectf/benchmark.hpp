#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spectf/admm.hpp"
#include "spectf/errors.hpp"
#include "spectf/models.hpp"
#include "spectf/parallel.hpp"
#include "spectf/random.hpp"
#include "spectf/simulation.hpp"

namespace spectf {

enum class BenchEstimator { TF4, TF1, MTF, SPL };

inline std::string to_string(BenchEstimator e) {
    switch (e) {
        case BenchEstimator::TF4: return "TF-4";
        case BenchEstimator::TF1: return "TF-1";
        case BenchEstimator::MTF: return "MTF";
        case BenchEstimator::SPL: return "SPL";
    }
    return "TF-4";
}

struct BenchmarkConfig {
    int reps = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    Eigen::Index n = 250;
    Eigen::Index p = 100;
    double snr = 4.0;
    int grid_count = 30;     // single-penalty lambda grid
    double grid_ratio = 1e-5;
    int mixed_count = 15;    // per axis of the mixed grid
    double mixed_ratio = 1e-4;
    int spline_count = 30;
    std::vector<ScenarioKind> scenarios = {ScenarioKind::A, ScenarioKind::B, ScenarioKind::C};
    std::vector<TargetFunction> targets = {TargetFunction::F1, TargetFunction::F2, TargetFunction::F3};
    std::vector<BenchEstimator> estimators = {BenchEstimator::TF4, BenchEstimator::TF1, BenchEstimator::MTF,
                                              BenchEstimator::SPL};
    // optional: restrict to a subset of (scenario, target, estimator) cells
    std::function<bool(ScenarioKind, TargetFunction, BenchEstimator)> include;
    ModelOptions model{};

    void validate() const {
        if (reps < 10) throw DataError("the benchmark needs at least 10 repetitions");
        if (grid_count < 1 || mixed_count < 1 || spline_count < 1) throw DataError("grid sizes must be positive");
        if (!(grid_ratio > 0.0 && grid_ratio < 1.0) || !(mixed_ratio > 0.0 && mixed_ratio < 1.0))
            throw DataError("grid ratios must lie in (0, 1)");
    }

    bool wants(ScenarioKind s, TargetFunction t, BenchEstimator e) const { return !include || include(s, t, e); }
};

struct BenchmarkRow {
    ScenarioKind scenario = ScenarioKind::A;
    TargetFunction target = TargetFunction::F1;
    BenchEstimator estimator = BenchEstimator::TF4;
    double mean_mise = 0.0;
    double se_mise = 0.0;
    int reps = 0;      // successful repetitions
    int failures = 0;  // repetitions whose fit or tuning failed
    std::vector<double> mise;  // per repetition, NaN on failure
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    std::uint64_t seed = 0;

    const BenchmarkRow* find(ScenarioKind s, TargetFunction t, BenchEstimator e) const {
        for (const auto& r : rows)
            if (r.scenario == s && r.target == t && r.estimator == e) return &r;
        return nullptr;
    }
};

/// Geometric grid for the quadratic baseline, centred on the ratio of the
/// data and penalty scales.
inline std::vector<double> spline_lambda_grid(const Matrix& xtx, Eigen::Index p, int count) {
    const double pen_scale = static_cast<double>(p - 2) * 6.0;  // trace of D2'D2
    const double scale = xtx.topLeftCorner(p, p).trace() / pen_scale;
    return geometric_grid(scale * 1e4, count, 1e-10);
}

/// Validation-set tuning for the quadratic baseline.
inline TfFit spline_holdout_select(const Matrix& X, const Matrix& Z, const Vector& y, const Matrix& X_val,
                                   const Matrix& Z_val, const Vector& y_val, ResponseFamily family,
                                   const std::vector<double>& lambdas, const ModelOptions& opts = {}) {
    std::optional<TfFit> best;
    double best_score = std::numeric_limits<double>::infinity();
    for (double lam : lambdas) {
        try {
            TfFit fit = fit_spline_baseline(X, Z, y, lam, family, opts);
            const double score = prediction_loss(family, y_val, predict(fit, X_val, Z_val).mean);
            // strict improvement only, so ties keep the stronger (earlier) penalty
            if (score < best_score) {
                best_score = score;
                best = std::move(fit);
            }
        } catch (const NumericalError&) {
        }
    }
    if (!best) throw NumericalError("every spline fit failed");
    return std::move(*best);
}

namespace detail {

inline double bench_cell(BenchEstimator est, const SyntheticDataset& d, const SyntheticDataset& v,
                         ResponseFamily fam, const std::vector<double>& spline_grid, const BenchmarkConfig& cfg) {
    const Eigen::Index r = scalar_columns(d.Z);
    const Matrix design = build_design(d.X, d.Z, false);
    auto lmax = [&](int order) {
        const double l = glm_lambda_max(design, d.y, fam, order, r);
        return l > 0.0 ? l : 1.0;
    };
    TfFit fit;
    switch (est) {
        case BenchEstimator::TF4:
        case BenchEstimator::TF1: {
            const int order = est == BenchEstimator::TF4 ? 4 : 1;
            const PenaltyGrid grid = PenaltyGrid::single(order, geometric_grid(lmax(order), cfg.grid_count, cfg.grid_ratio));
            fit = holdout_select(d.X, d.Z, d.y, v.X, v.Z, v.y, fam, grid, cfg.model).second;
            break;
        }
        case BenchEstimator::MTF: {
            const PenaltyGrid grid = PenaltyGrid::mixed(4, geometric_grid(lmax(4), cfg.mixed_count, cfg.grid_ratio), 1,
                                                        geometric_grid(lmax(1), cfg.mixed_count, cfg.mixed_ratio));
            fit = holdout_select(d.X, d.Z, d.y, v.X, v.Z, v.y, fam, grid, cfg.model).second;
            break;
        }
        case BenchEstimator::SPL:
            fit = spline_holdout_select(d.X, d.Z, d.y, v.X, v.Z, v.y, fam, spline_grid, cfg.model);
            break;
    }
    return mise(fit.f_hat, d.f_true, d.domain_grid);
}

} // namespace detail

/// Number of constant pieces in `v`; neighbours within `tol` count as equal.
inline int segment_count(const Vector& v, double tol = 0.0) {
    if (v.size() == 0) return 0;
    int pieces = 1;
    for (Eigen::Index j = 1; j < v.size(); ++j)
        if (std::abs(v[j] - v[j - 1]) > tol) ++pieces;
    return pieces;
}

/// Fits over a (lambda_low x lambda_high) grid of two-term penalties and
/// records, for every cell, the number of pieces of the low-order block and
/// the l1 norm of the high-order differences, both read off the solver's
/// auxiliary variable. Rows follow lambdas_high, columns lambdas_low.
struct PenaltySweep {
    int low_order = 1;
    int high_order = 4;
    std::vector<double> lambdas_low;
    std::vector<double> lambdas_high;
    Eigen::MatrixXi segments;
    Matrix high_norm;
    Eigen::MatrixXi converged;
};

inline PenaltySweep mixed_penalty_sweep(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                                        const Eigen::Ref<const Vector>& y, int low_order,
                                        const std::vector<double>& lambdas_low, int high_order,
                                        const std::vector<double>& lambdas_high, const ModelOptions& opts = {}) {
    const PenaltyGrid grid = PenaltyGrid::mixed(low_order, lambdas_low, high_order, lambdas_high);
    const auto fits = fit_grid(X, Z, y, ResponseFamily{Family::Gaussian}, grid, opts);
    PenaltySweep out;
    out.low_order = low_order;
    out.high_order = high_order;
    out.lambdas_low = lambdas_low;
    out.lambdas_high = lambdas_high;
    const auto n1 = static_cast<Eigen::Index>(lambdas_low.size());
    const auto n2 = static_cast<Eigen::Index>(lambdas_high.size());
    out.segments.resize(n2, n1);
    out.high_norm.resize(n2, n1);
    out.converged.resize(n2, n1);
    const Eigen::Index p = X.cols();
    const Eigen::Index len_low = p - (low_order - 1);
    const Eigen::Index len_high = p - (high_order - 1);
    for (Eigen::Index b = 0; b < n2; ++b)
        for (Eigen::Index a = 0; a < n1; ++a) {
            const auto& fit = fits[static_cast<std::size_t>(b * n1 + a)];
            if (!fit) throw NumericalError("sweep fit failed");
            const Vector& delta = fit->state.delta;
            const Vector low = delta.head(len_low);
            const Vector high = delta.segment(len_low, len_high);
            const double tol = 1e-9 * std::max(1.0, low.cwiseAbs().maxCoeff());
            out.segments(b, a) = segment_count(low, tol);
            out.high_norm(b, a) = (high.tail(len_high - 1) - high.head(len_high - 1)).lpNorm<1>();
            out.converged(b, a) = fit->diagnostics.converged ? 1 : 0;
        }
    return out;
}

/// Simulation study: every requested scenario x target x estimator cell over
/// `reps` repetitions with validation-set tuning. The training and validation
/// covariate matrices are drawn once and kept fixed; repetition r draws its
/// responses from substreams (seed, r) shared by all cells.
inline BenchmarkReport run_table1(const BenchmarkConfig& cfg) {
    cfg.validate();
    Rng rx = substream(cfg.seed, streams::covariates);
    Rng rxv = substream(cfg.seed, streams::validation_covariates);
    const Matrix X = gen_functional_covariates(cfg.n, cfg.p, rx);
    const Matrix Xv = gen_functional_covariates(cfg.n, cfg.p, rxv);
    const std::vector<double> spline_grid = spline_lambda_grid(X.transpose() * X, cfg.p, cfg.spline_count);

    BenchmarkReport report;
    report.seed = cfg.seed;
    for (ScenarioKind s : cfg.scenarios)
        for (TargetFunction t : cfg.targets)
            for (BenchEstimator e : cfg.estimators) {
                if (!cfg.wants(s, t, e)) continue;
                BenchmarkRow row;
                row.scenario = s;
                row.target = t;
                row.estimator = e;
                row.mise.assign(static_cast<std::size_t>(cfg.reps), std::numeric_limits<double>::quiet_NaN());
                report.rows.push_back(std::move(row));
            }

    parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t rep) {
        for (ScenarioKind s : cfg.scenarios) {
            for (TargetFunction t : cfg.targets) {
                ScenarioSpec spec;
                spec.kind = s;
                spec.target = t;
                spec.n = cfg.n;
                spec.p = cfg.p;
                spec.snr = cfg.snr;
                spec.seed = cfg.seed;
                std::optional<SyntheticDataset> d, v;
                for (auto& row : report.rows) {
                    if (row.scenario != s || row.target != t) continue;
                    if (!d) {
                        Rng rt = substream(cfg.seed, streams::repetition, rep);
                        Rng rv = substream(cfg.seed, streams::validation, rep);
                        d = gen_scenario(spec, X, rt);
                        v = gen_scenario(spec, Xv, rv);
                    }
                    try {
                        row.mise[rep] = detail::bench_cell(row.estimator, *d, *v, spec.family(), spline_grid, cfg);
                    } catch (const Error&) {
                        // recorded as a failed repetition
                    }
                }
            }
        }
    });

    for (auto& row : report.rows) {
        double sum = 0.0;
        int ok = 0;
        for (double m : row.mise)
            if (std::isfinite(m)) {
                sum += m;
                ++ok;
            }
        row.reps = ok;
        row.failures = cfg.reps - ok;
        row.mean_mise = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
        double ss = 0.0;
        for (double m : row.mise)
            if (std::isfinite(m)) ss += (m - row.mean_mise) * (m - row.mean_mise);
        row.se_mise = ok > 1 ? std::sqrt(ss / (ok - 1) / ok) : std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

/// One row per cell; numbers use the shortest representation that reads back
/// to the same double.
inline void write_benchmark_csv(const BenchmarkReport& report, std::ostream& out) {
    auto num = [](double v) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    };
    out << "scenario,function,estimator,mean_mise,se_mise,reps,seed\n";
    for (const auto& r : report.rows)
        out << to_string(r.scenario) << ',' << to_string(r.target) << ',' << to_string(r.estimator) << ','
            << num(r.mean_mise) << ',' << num(r.se_mise) << ',' << r.reps << ',' << report.seed << '\n';
}

} // namespace spectf
