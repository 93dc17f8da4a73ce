#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "spectf/bspline.hpp"
#include "spectf/errors.hpp"
#include "spectf/family.hpp"
#include "spectf/random.hpp"

namespace spectf {

enum class ScenarioKind { A, B, C };
enum class TargetFunction { F1, F2, F3 };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::A: return "a";
        case ScenarioKind::B: return "b";
        case ScenarioKind::C: return "c";
    }
    return "a";
}

inline std::string to_string(TargetFunction f) {
    switch (f) {
        case TargetFunction::F1: return "f1";
        case TargetFunction::F2: return "f2";
        case TargetFunction::F3: return "f3";
    }
    return "f1";
}

inline ScenarioKind scenario_from_string(const std::string& s) {
    if (s == "a") return ScenarioKind::A;
    if (s == "b") return ScenarioKind::B;
    if (s == "c") return ScenarioKind::C;
    throw DataError("unknown scenario '" + s + "' (expected a, b or c)");
}

inline TargetFunction target_from_string(const std::string& s) {
    if (s == "f1") return TargetFunction::F1;
    if (s == "f2") return TargetFunction::F2;
    if (s == "f3") return TargetFunction::F3;
    throw DataError("unknown target '" + s + "' (expected f1, f2 or f3)");
}

/// Coefficients of the piecewise-cubic target on its 7-function basis
/// (cubic, interior knots 0.2, 0.75, 0.9). Drawn once from N(0, 1) with a
/// fixed seed and frozen here.
inline constexpr std::array<double, 7> kF1Coefficients = {0.6017, 1.1516, -1.3595, 0.2221, -0.7759, 0.8087, -0.1986};

inline constexpr int kCovariateInteriorKnots = 10;

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::A;
    TargetFunction target = TargetFunction::F2;
    Eigen::Index n = 250;
    Eigen::Index p = 100;
    double snr = 4.0;  // sd(signal) / sd(noise)
    bool noiseless = false;
    Eigen::Index r = 5;  // scenario b only
    Eigen::VectorXd gamma = (Eigen::VectorXd(5) << 2.0, -1.0, 1.0, 0.0, 0.0).finished();
    std::uint64_t seed = 1;

    ResponseFamily family() const { return {kind == ScenarioKind::C ? Family::Bernoulli : Family::Gaussian}; }

    void validate() const {
        if (n < 1 || p < 8) throw DataError("scenario needs n >= 1 and p >= 8");
        if (!noiseless && kind != ScenarioKind::C && !(snr > 0.0)) throw DataError("snr must be positive");
        if (kind == ScenarioKind::B && gamma.size() != r) throw DataError("gamma length must equal r");
    }
};

struct SyntheticDataset {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Z;  // empty unless scenario b
    Eigen::VectorXd y;
    Eigen::VectorXd f_true;
    Eigen::VectorXd mu_true;  // linear predictor
    Eigen::VectorXd grid;     // covariate grid on [0, 1]
    Eigen::VectorXd domain_grid;  // grid on the target's native domain
    double sigma = 0.0;
};

/// Equispaced grid of p points on [lo, hi], endpoints included.
inline Eigen::VectorXd unit_grid(Eigen::Index p, double lo = 0.0, double hi = 1.0) {
    return Eigen::VectorXd::LinSpaced(p, lo, hi);
}

/// Native domain of a target: [0, 1] for f1, [-5, 5] for f2 and f3.
inline std::pair<double, double> target_domain(TargetFunction which) {
    return which == TargetFunction::F1 ? std::pair{0.0, 1.0} : std::pair{-5.0, 5.0};
}

inline double mexican_hat(double w) { return (1.0 - w * w) * std::exp(-0.5 * w * w); }

/// Target function values on the p-grid, evaluated on its native domain.
inline Eigen::VectorXd target_function(TargetFunction which, Eigen::Index p) {
    if (p < 8) throw DimensionError("target functions need p >= 8");
    const auto [lo, hi] = target_domain(which);
    const Eigen::VectorXd w = unit_grid(p, lo, hi);
    Eigen::VectorXd f(p);
    switch (which) {
        case TargetFunction::F1: {
            const BSplineBasis basis({0.2, 0.75, 0.9}, 3);
            const Eigen::Map<const Eigen::VectorXd> coef(kF1Coefficients.data(), kF1Coefficients.size());
            f = basis.design(w) * coef;
            break;
        }
        case TargetFunction::F2:
            for (Eigen::Index j = 0; j < p; ++j) f[j] = mexican_hat(w[j]);
            break;
        case TargetFunction::F3:
            for (Eigen::Index j = 0; j < p; ++j) f[j] = std::clamp(mexican_hat(w[j]), -0.3, 0.5);
            break;
    }
    return f;
}

/// n curves from a cubic B-spline basis with 10 equispaced interior knots
/// (14 functions) and standard-normal coefficients, evaluated on the p-grid.
inline Eigen::MatrixXd gen_functional_covariates(Eigen::Index n, Eigen::Index p, Rng& rng) {
    if (n < 1 || p < 1) throw DimensionError("need n, p >= 1");
    const BSplineBasis basis = BSplineBasis::equispaced(kCovariateInteriorKnots, 3);
    const Eigen::MatrixXd B = basis.design(unit_grid(p));
    std::normal_distribution<double> nd;
    Eigen::MatrixXd coef(basis.size(), n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < basis.size(); ++k) coef(k, i) = nd(rng);
    return (B * coef).transpose();
}

inline Eigen::MatrixXd gen_functional_covariates(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    Rng rng = substream(seed, streams::covariates);
    return gen_functional_covariates(n, p, rng);
}

/// Responses (and scalar covariates for scenario b) for a fixed covariate
/// matrix X, drawn from `rng`.
inline SyntheticDataset gen_scenario(const ScenarioSpec& spec, const Eigen::MatrixXd& X, Rng& rng) {
    spec.validate();
    if (X.rows() != spec.n || X.cols() != spec.p) throw DimensionError("covariate matrix does not match the scenario");
    SyntheticDataset d;
    d.X = X;
    d.grid = unit_grid(spec.p);
    const auto [lo, hi] = target_domain(spec.target);
    d.domain_grid = unit_grid(spec.p, lo, hi);
    d.f_true = target_function(spec.target, spec.p);
    d.mu_true = X * d.f_true;

    std::normal_distribution<double> nd;
    if (spec.kind == ScenarioKind::B) {
        d.Z.resize(spec.n, spec.r);
        for (Eigen::Index j = 0; j < spec.r; ++j)
            for (Eigen::Index i = 0; i < spec.n; ++i) d.Z(i, j) = nd(rng);
        d.mu_true += d.Z * spec.gamma;
    }

    d.y.resize(spec.n);
    if (spec.kind == ScenarioKind::C) {
        const ResponseFamily fam{Family::Bernoulli};
        for (Eigen::Index i = 0; i < spec.n; ++i) {
            std::bernoulli_distribution coin(fam.mean(d.mu_true[i]));
            d.y[i] = spec.noiseless ? static_cast<double>(d.mu_true[i] >= 0.0) : static_cast<double>(coin(rng));
        }
        return d;
    }
    if (spec.noiseless) {
        d.y = d.mu_true;
        return d;
    }
    const double mean = d.mu_true.mean();
    const double sd = spec.n > 1 ? std::sqrt((d.mu_true.array() - mean).square().sum() / (spec.n - 1)) : 0.0;
    d.sigma = sd / spec.snr;
    for (Eigen::Index i = 0; i < spec.n; ++i) d.y[i] = d.mu_true[i] + d.sigma * nd(rng);
    return d;
}

/// Self-contained draw: X from the seed's covariate stream, responses from
/// its repetition stream.
inline SyntheticDataset gen_scenario(const ScenarioSpec& spec) {
    const Eigen::MatrixXd X = gen_functional_covariates(spec.n, spec.p, spec.seed);
    Rng rng = substream(spec.seed, streams::repetition);
    return gen_scenario(spec, X, rng);
}

/// Integrated squared error on the grid (trapezoid rule over the grid's span).
inline double mise(const Eigen::VectorXd& f_hat, const Eigen::VectorXd& f_true, const Eigen::VectorXd& grid) {
    if (f_hat.size() != f_true.size() || f_hat.size() != grid.size())
        throw DimensionError("mise: f_hat, f_true and grid must have equal lengths");
    const Eigen::Index p = grid.size();
    if (p == 1) return (f_hat - f_true).squaredNorm();
    const Eigen::ArrayXd sq = (f_hat - f_true).array().square();
    double total = 0.0;
    for (Eigen::Index j = 0; j + 1 < p; ++j) total += 0.5 * (sq[j] + sq[j + 1]) * (grid[j + 1] - grid[j]);
    return total;
}

} // namespace spectf
