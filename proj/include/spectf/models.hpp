#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "spectf/admm.hpp"
#include "spectf/family.hpp"
#include "spectf/parallel.hpp"
#include "spectf/random.hpp"

namespace spectf {

struct ModelOptions {
    bool intercept = false;
    AdmmConfig admm{};
    int glm_max_outer = 100;
    double glm_tol = 1e-6;
    int max_halvings = 20;
    double divergence_norm = 1e6;
};

struct FitDiagnostics {
    int admm_iterations = 0;   // summed over outer iterations for GLMs
    int outer_iterations = 0;  // 1 for Gaussian fits
    double primal_res = 0.0;
    double dual_res = 0.0;
    double objective = 0.0;
    bool converged = false;
    std::vector<double> objective_trace;  // penalized objective after each outer step
};

enum class Estimator { TrendFilter, Spline };

/// A fitted model. f_hat lives on the training grid; gamma_hat holds the
/// intercept (first, when present) followed by the scalar covariates.
struct TfFit {
    Estimator estimator = Estimator::TrendFilter;
    Vector f_hat;
    Vector gamma_hat;
    bool intercept = false;
    std::vector<std::string> scalar_names;
    PenaltySpec penalty;
    double spline_lambda = 0.0;
    ResponseFamily family;
    FitDiagnostics diagnostics;
    Vector grid;
    double sigma2 = 0.0;
    AdmmState state;

    Eigen::Index p() const { return f_hat.size(); }
    Eigen::Index scalar_count() const { return gamma_hat.size(); }

    Vector coefficients() const {
        Vector theta(f_hat.size() + gamma_hat.size());
        theta << f_hat, gamma_hat;
        return theta;
    }
};

namespace detail {

inline Eigen::Index scalar_columns(const Eigen::Ref<const Matrix>& Z) { return Z.size() == 0 ? 0 : Z.cols(); }

/// [X | 1 | Z], with the constant column only when an intercept is requested.
inline Matrix build_design(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z, bool intercept) {
    const Eigen::Index zc = scalar_columns(Z);
    if (zc > 0 && Z.rows() != X.rows())
        throw DimensionError("scalar covariates have " + std::to_string(Z.rows()) + " rows, spectra have " +
                             std::to_string(X.rows()));
    const Eigen::Index extra = (intercept ? 1 : 0) + zc;
    Matrix design(X.rows(), X.cols() + extra);
    design.leftCols(X.cols()) = X;
    Eigen::Index col = X.cols();
    if (intercept) design.col(col++).setOnes();
    if (zc > 0) design.rightCols(zc) = Z;
    return design;
}

inline std::vector<std::string> default_scalar_names(Eigen::Index zc, bool intercept) {
    std::vector<std::string> names;
    if (intercept) names.emplace_back("Intercept");
    for (Eigen::Index j = 0; j < zc; ++j) names.push_back("z" + std::to_string(j + 1));
    return names;
}

inline void check_inputs(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
    if (X.rows() != y.size())
        throw DimensionError("spectra have " + std::to_string(X.rows()) + " rows but the response has " +
                             std::to_string(y.size()));
    if (X.rows() < 2) throw DimensionError("need at least two observations");
    if (!X.allFinite()) throw DataError("spectra contain NaN/Inf");
    if (!y.allFinite()) throw DataError("response contains NaN/Inf");
}

inline TfFit make_fit(const Vector& theta, Eigen::Index p, const std::vector<std::string>& names, bool intercept) {
    TfFit fit;
    fit.f_hat = theta.head(p);
    fit.gamma_hat = theta.tail(theta.size() - p);
    fit.intercept = intercept;
    fit.scalar_names = names;
    fit.grid = Vector::LinSpaced(p, 1.0, static_cast<double>(p));
    return fit;
}

inline double family_nll(const ResponseFamily& fam, const Vector& y, const Vector& eta) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += fam.nll(y[i], eta[i]);
    return s;
}

/// Sufficient statistics of the IRLS working problem at eta:
/// W = V(mu), s = eta + (y - mu)/W, loss 1/2 ||W^{1/2}(s - X a)||^2.
inline GramProblem working_problem(const Matrix& design, const Vector& y, const Vector& eta,
                                   const ResponseFamily& fam, Eigen::Index r) {
    const Eigen::Index n = y.size();
    Vector sqrt_w(n), ytilde(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = fam.mean(eta[i]);
        const double w = fam.weight(mu);
        const double s = eta[i] + (y[i] - mu) / w;
        sqrt_w[i] = std::sqrt(w);
        ytilde[i] = sqrt_w[i] * s;
    }
    const Matrix xtilde = sqrt_w.asDiagonal() * design;
    return GramProblem::from_design(xtilde, ytilde, r);
}

} // namespace detail

/// Gaussian functional (or partial functional) linear model fitted by the
/// specialized ADMM: 1/2 ||y - X f - Z gamma||^2 + penalty on f.
inline TfFit fit_gaussian(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                          const Eigen::Ref<const Vector>& y, const PenaltySpec& penalty,
                          const ModelOptions& opts = {}) {
    detail::check_inputs(X, y);
    penalty.validate();
    const Eigen::Index zc = detail::scalar_columns(Z);
    const Eigen::Index r = zc + (opts.intercept ? 1 : 0);
    const auto names = detail::default_scalar_names(zc, opts.intercept);

    const bool constant = (y.array() == y[0]).all();
    if (constant && y[0] != 0.0) {
        if (!opts.intercept) throw DataError("response is constant and no intercept was requested");
        Vector theta = Vector::Zero(X.cols() + r);
        theta[X.cols()] = y[0];
        TfFit fit = detail::make_fit(theta, X.cols(), names, true);
        fit.penalty = penalty;
        fit.diagnostics.converged = true;
        fit.diagnostics.outer_iterations = 1;
        return fit;
    }

    const Matrix design = detail::build_design(X, Z, opts.intercept);
    const GramProblem prob = GramProblem::from_design(design, y, r);
    AdmmSolver solver(prob, penalty, opts.admm);
    AdmmState state = solver.solve();

    TfFit fit = detail::make_fit(state.alpha, X.cols(), names, opts.intercept);
    fit.penalty = penalty;
    fit.diagnostics.admm_iterations = state.iter;
    fit.diagnostics.outer_iterations = 1;
    fit.diagnostics.primal_res = state.primal_res;
    fit.diagnostics.dual_res = state.dual_res;
    fit.diagnostics.objective = state.objective;
    fit.diagnostics.converged = state.converged;
    fit.diagnostics.objective_trace = {state.objective};
    fit.sigma2 = (y - design * state.alpha).squaredNorm() / static_cast<double>(y.size());
    fit.state = std::move(state);
    return fit;
}

/// Generalized functional linear model: IRLS outer loop (Fisher scoring step
/// builds a weighted least-squares problem) alternating with the ADMM.
/// Step-halving keeps the penalized negative log-likelihood non-increasing.
inline TfFit fit_glm(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                     const Eigen::Ref<const Vector>& y, ResponseFamily family, const PenaltySpec& penalty,
                     const ModelOptions& opts = {}) {
    if (family.kind == Family::Gaussian) return fit_gaussian(X, Z, y, penalty, opts);
    detail::check_inputs(X, y);
    penalty.validate();
    family.validate_response(y);
    const Eigen::Index zc = detail::scalar_columns(Z);
    const Eigen::Index r = zc + (opts.intercept ? 1 : 0);
    const Matrix design = detail::build_design(X, Z, opts.intercept);
    const Eigen::Index p = X.cols();

    auto objective = [&](const Vector& alpha) {
        return detail::family_nll(family, y, design * alpha) + penalty_value(penalty, alpha, p);
    };

    AdmmState state;
    if (opts.admm.warm_start && opts.admm.warm_start->alpha.size() == design.cols()) {
        state = *opts.admm.warm_start;
    } else {
        state.alpha = Vector::Zero(design.cols());
    }
    Vector alpha = state.alpha;
    double obj = objective(alpha);

    FitDiagnostics diag;
    diag.objective_trace.push_back(obj);
    const ConstraintSystem constraints(penalty, p, r);
    AdmmConfig inner = opts.admm;
    inner.warm_start.reset();

    for (int outer = 1; outer <= opts.glm_max_outer; ++outer) {
        const GramProblem work = detail::working_problem(design, y, design * alpha, family, r);
        AdmmSolver solver(work, penalty, inner, &constraints);
        const bool have_warm = state.delta.size() > 0;
        AdmmState next = solver.solve(work.xty, work.yty, have_warm ? &state : nullptr);
        diag.admm_iterations += next.iter;
        diag.primal_res = next.primal_res;
        diag.dual_res = next.dual_res;
        diag.outer_iterations = outer;

        Vector candidate = next.alpha;
        if (!candidate.allFinite() || candidate.norm() > opts.divergence_norm)
            throw NumericalError("GLM iterations diverged (coefficient norm exploded); the data may be "
                                 "separable, try a larger lambda");
        double cand_obj = objective(candidate);
        int halvings = 0;
        while (!(cand_obj <= obj) && halvings < opts.max_halvings) {
            candidate = 0.5 * (alpha + candidate);
            cand_obj = objective(candidate);
            ++halvings;
        }
        state = std::move(next);
        if (!(cand_obj <= obj)) {
            // no descent along the Newton direction: current iterate is as good as it gets
            diag.converged = true;
            break;
        }
        const double change = std::abs(obj - cand_obj) / std::max(1.0, std::abs(cand_obj));
        alpha = candidate;
        obj = cand_obj;
        diag.objective_trace.push_back(obj);
        if (change < opts.glm_tol) {
            diag.converged = true;
            break;
        }
    }
    state.alpha = alpha;
    diag.objective = obj;
    if (family.kind == Family::Bernoulli) {
        // the probability clamp stops |alpha| from exploding on separable
        // data, so look for the symptom directly: every label reproduced
        const Vector eta = design * alpha;
        bool separated = true;
        for (Eigen::Index i = 0; i < y.size() && separated; ++i)
            separated = std::abs(y[i] - family.mean(eta[i])) < 1e-4;
        if (separated)
            throw NumericalError("the classes are perfectly separated by the fit; try a larger lambda");
    }

    TfFit fit = detail::make_fit(alpha, p, detail::default_scalar_names(zc, opts.intercept), opts.intercept);
    fit.penalty = penalty;
    fit.family = family;
    fit.diagnostics = std::move(diag);
    fit.state = std::move(state);
    return fit;
}

/// Quadratic-penalty baseline: 1/2 ||y - X f||^2 + lam/2 ||D^(2) f||^2, closed
/// form for Gaussian responses, penalized IRLS otherwise.
inline TfFit fit_spline_baseline(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                                 const Eigen::Ref<const Vector>& y, double lam, ResponseFamily family = {},
                                 const ModelOptions& opts = {}) {
    detail::check_inputs(X, y);
    if (!(lam >= 0.0) || !std::isfinite(lam)) throw DataError("spline lambda must be finite and nonnegative");
    family.validate_response(y);
    const Eigen::Index zc = detail::scalar_columns(Z);
    const Eigen::Index r = zc + (opts.intercept ? 1 : 0);
    const Eigen::Index p = X.cols();
    const Matrix design = detail::build_design(X, Z, opts.intercept);
    const Matrix pen_gram = AugmentedOperator(DifferenceOperator(p, 2), r).gram();

    FitDiagnostics diag;
    Vector alpha = Vector::Zero(design.cols());
    if (family.kind == Family::Gaussian) {
        const GramProblem prob = GramProblem::from_design(design, y, r);
        alpha = factorize_normal(prob.xtx, pen_gram, lam).solve(prob.xty);
        diag.outer_iterations = 1;
        diag.converged = true;
        diag.objective = prob.loss(alpha) + 0.5 * lam * alpha.dot(pen_gram * alpha);
    } else {
        auto objective = [&](const Vector& a) {
            return detail::family_nll(family, y, design * a) + 0.5 * lam * a.dot(pen_gram * a);
        };
        double obj = objective(alpha);
        diag.objective_trace.push_back(obj);
        for (int outer = 1; outer <= opts.glm_max_outer; ++outer) {
            const GramProblem work = detail::working_problem(design, y, design * alpha, family, r);
            Vector candidate = factorize_normal(work.xtx, pen_gram, lam).solve(work.xty);
            if (!candidate.allFinite() || candidate.norm() > opts.divergence_norm)
                throw NumericalError("penalized spline GLM diverged; try a larger lambda");
            double cand_obj = objective(candidate);
            for (int h = 0; h < opts.max_halvings && !(cand_obj <= obj); ++h) {
                candidate = 0.5 * (alpha + candidate);
                cand_obj = objective(candidate);
            }
            diag.outer_iterations = outer;
            if (!(cand_obj <= obj)) {
                diag.converged = true;
                break;
            }
            const double change = std::abs(obj - cand_obj) / std::max(1.0, std::abs(cand_obj));
            alpha = candidate;
            obj = cand_obj;
            diag.objective_trace.push_back(obj);
            if (change < opts.glm_tol) {
                diag.converged = true;
                break;
            }
        }
        diag.objective = obj;
    }
    TfFit fit = detail::make_fit(alpha, p, detail::default_scalar_names(zc, opts.intercept), opts.intercept);
    fit.estimator = Estimator::Spline;
    fit.spline_lambda = lam;
    fit.penalty = PenaltySpec::single(2, lam);
    fit.family = family;
    fit.diagnostics = std::move(diag);
    if (family.kind == Family::Gaussian)
        fit.sigma2 = (y - design * alpha).squaredNorm() / static_cast<double>(y.size());
    return fit;
}

struct Prediction {
    Vector eta;   // linear predictor
    Vector mean;  // inverse link of eta
    std::vector<int> label;  // Bernoulli only: mean >= 0.5
};

inline Prediction predict(const TfFit& fit, const Eigen::Ref<const Matrix>& X_new,
                          const Eigen::Ref<const Matrix>& Z_new = Matrix()) {
    if (X_new.cols() != fit.p())
        throw DimensionError("model was trained on " + std::to_string(fit.p()) + " grid points, new spectra have " +
                             std::to_string(X_new.cols()));
    const Eigen::Index zc = detail::scalar_columns(Z_new);
    const Eigen::Index expected_z = fit.scalar_count() - (fit.intercept ? 1 : 0);
    if (zc != expected_z)
        throw DimensionError("model expects " + std::to_string(expected_z) + " scalar covariates, got " +
                             std::to_string(zc));
    const Matrix design = detail::build_design(X_new, Z_new, fit.intercept);
    Prediction out;
    out.eta = design * fit.coefficients();
    out.mean.resize(out.eta.size());
    for (Eigen::Index i = 0; i < out.eta.size(); ++i) out.mean[i] = fit.family.mean(out.eta[i]);
    if (fit.family.kind == Family::Bernoulli) {
        out.label.resize(static_cast<std::size_t>(out.eta.size()));
        for (Eigen::Index i = 0; i < out.eta.size(); ++i) out.label[static_cast<std::size_t>(i)] = out.mean[i] >= 0.5;
    }
    return out;
}

/// Mean held-out loss: squared error for Gaussian, mean unit deviance otherwise.
inline double prediction_loss(const ResponseFamily& fam, const Vector& y, const Vector& mean) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += fam.deviance(y[i], mean[i]);
    return s / static_cast<double>(y.size());
}

inline double misclassification(const Vector& y, const Vector& mean) {
    double wrong = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) wrong += ((mean[i] >= 0.5 ? 1.0 : 0.0) != y[i]);
    return wrong / static_cast<double>(y.size());
}

/// Ordered penalty grid with, for each point, the earlier point whose solution
/// seeds its warm start (-1 for a cold start).
struct PenaltyGrid {
    std::vector<PenaltySpec> points;
    std::vector<int> warm_parent;

    std::size_t size() const { return points.size(); }

    /// Warm starts along the list order.
    static PenaltyGrid chain(std::vector<PenaltySpec> pts) {
        PenaltyGrid g;
        g.points = std::move(pts);
        for (std::size_t i = 0; i < g.points.size(); ++i) g.warm_parent.push_back(static_cast<int>(i) - 1);
        return g;
    }

    static PenaltyGrid single(int order, const std::vector<double>& lambdas) {
        std::vector<PenaltySpec> pts;
        for (double l : lambdas) pts.push_back(PenaltySpec::single(order, l));
        return chain(std::move(pts));
    }

    /// Rows over lambdas2, columns over lambdas1; warm starts run along each
    /// row (the lambda1 axis), and each row's first point starts from the
    /// previous row's first point.
    static PenaltyGrid mixed(int order1, const std::vector<double>& lambdas1, int order2,
                             const std::vector<double>& lambdas2) {
        PenaltyGrid g;
        const int n1 = static_cast<int>(lambdas1.size());
        for (std::size_t b = 0; b < lambdas2.size(); ++b) {
            for (int a = 0; a < n1; ++a) {
                g.points.push_back(PenaltySpec::mixed(order1, lambdas1[static_cast<std::size_t>(a)], order2,
                                                      lambdas2[b]));
                const int idx = static_cast<int>(g.points.size()) - 1;
                g.warm_parent.push_back(a > 0 ? idx - 1 : (b > 0 ? idx - n1 : -1));
            }
        }
        return g;
    }
};

/// Fits every grid point on one training set, warm-starting each from its
/// parent. Failed points hold std::nullopt.
inline std::vector<std::optional<TfFit>> fit_grid(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                                                  const Eigen::Ref<const Vector>& y, ResponseFamily family,
                                                  const PenaltyGrid& grid, const ModelOptions& opts = {}) {
    std::vector<std::optional<TfFit>> fits(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ModelOptions local = opts;
        const int parent = grid.warm_parent.at(i);
        if (parent >= 0 && fits[static_cast<std::size_t>(parent)])
            local.admm.warm_start = fits[static_cast<std::size_t>(parent)]->state;
        try {
            fits[i] = fit_glm(X, Z, y, family, grid.points[i], local);
        } catch (const NumericalError&) {
            fits[i].reset();
        }
    }
    return fits;
}

struct CvReport {
    std::vector<PenaltySpec> grid;
    std::vector<double> mean_score;
    std::vector<double> se_score;
    std::vector<double> mean_misclassification;  // Bernoulli only
    std::vector<std::vector<double>> fold_scores;  // [grid point][fold]
    std::size_t best_index = 0;
    PenaltySpec best;
    int folds = 0;
    std::uint64_t seed = 0;
    bool holdout = false;
};

namespace detail {

inline std::size_t select_best(const std::vector<double>& mean, const std::vector<PenaltySpec>& grid) {
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (!std::isfinite(mean[i])) continue;
        const bool better = mean[i] < best_score;
        const bool tie_stronger = mean[i] == best_score && grid[i].total_strength() > grid[best].total_strength();
        if (better || tie_stronger) {
            best = i;
            best_score = mean[i];
        }
    }
    if (!std::isfinite(best_score)) throw NumericalError("every grid point failed to fit");
    return best;
}

template <typename Rows>
Matrix take_rows(const Eigen::Ref<const Matrix>& M, const Rows& rows) {
    if (M.size() == 0) return Matrix();
    Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
    return out;
}

template <typename Rows>
Vector take(const Eigen::Ref<const Vector>& v, const Rows& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return out;
}

} // namespace detail

/// Deterministic fold labels; stratified by class for Bernoulli responses.
inline std::vector<int> assign_folds(const Vector& y, int K, std::uint64_t seed, bool stratify) {
    const auto n = static_cast<std::size_t>(y.size());
    std::vector<int> fold(n, 0);
    Rng rng = substream(seed, streams::folds);
    std::vector<std::vector<Eigen::Index>> groups;
    if (stratify) {
        groups.resize(2);
        for (Eigen::Index i = 0; i < y.size(); ++i) groups[y[i] != 0.0 ? 1 : 0].push_back(i);
        for (const auto& g : groups)
            if (g.size() == 1) throw DataError("stratified folds need at least two observations of each class");
    } else {
        groups.emplace_back(n);
        std::iota(groups[0].begin(), groups[0].end(), Eigen::Index{0});
    }
    int next = 0;
    for (auto& g : groups) {
        std::shuffle(g.begin(), g.end(), rng);
        for (Eigen::Index i : g) {
            fold[static_cast<std::size_t>(i)] = next;
            next = (next + 1) % K;
        }
    }
    return fold;
}

/// K-fold cross-validation over a penalty grid with warm starts inside each fold.
inline CvReport cross_validate(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                               const Eigen::Ref<const Vector>& y, ResponseFamily family, const PenaltyGrid& grid,
                               int K, std::uint64_t seed, const ModelOptions& opts = {}, unsigned threads = 1) {
    if (K < 2) throw DataError("cross-validation needs at least two folds");
    if (grid.size() == 0) throw DataError("penalty grid is empty");
    detail::check_inputs(X, y);
    family.validate_response(y);
    if (K > y.size()) throw DataError("more folds than observations");
    const auto fold = assign_folds(y, K, seed, family.kind == Family::Bernoulli);

    const std::size_t G = grid.size();
    std::vector<std::vector<double>> scores(G, std::vector<double>(static_cast<std::size_t>(K)));
    std::vector<std::vector<double>> miss(G, std::vector<double>(static_cast<std::size_t>(K)));
    parallel_for(static_cast<std::size_t>(K), threads, [&](std::size_t k) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < fold.size(); ++i)
            (fold[i] == static_cast<int>(k) ? test : train).push_back(static_cast<Eigen::Index>(i));
        const Matrix Xtr = detail::take_rows(X, train), Xte = detail::take_rows(X, test);
        const Matrix Ztr = detail::take_rows(Z, train), Zte = detail::take_rows(Z, test);
        const Vector ytr = detail::take(y, train), yte = detail::take(y, test);
        const auto fits = fit_grid(Xtr, Ztr, ytr, family, grid, opts);
        for (std::size_t g = 0; g < G; ++g) {
            if (!fits[g]) {
                scores[g][k] = std::numeric_limits<double>::infinity();
                miss[g][k] = 1.0;
                continue;
            }
            const Prediction pred = predict(*fits[g], Xte, Zte);
            scores[g][k] = prediction_loss(family, yte, pred.mean);
            miss[g][k] = family.kind == Family::Bernoulli ? misclassification(yte, pred.mean) : 0.0;
        }
    });

    CvReport rep;
    rep.grid = grid.points;
    rep.folds = K;
    rep.seed = seed;
    rep.fold_scores = scores;
    for (std::size_t g = 0; g < G; ++g) {
        const auto& s = scores[g];
        const double mean = std::accumulate(s.begin(), s.end(), 0.0) / K;
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var = K > 1 ? var / (K - 1) : 0.0;
        rep.mean_score.push_back(mean);
        rep.se_score.push_back(std::sqrt(var / K));
        if (family.kind == Family::Bernoulli)
            rep.mean_misclassification.push_back(std::accumulate(miss[g].begin(), miss[g].end(), 0.0) / K);
    }
    rep.best_index = detail::select_best(rep.mean_score, rep.grid);
    rep.best = rep.grid[rep.best_index];
    return rep;
}

/// Holdout-set tuning: fits the grid once on the training data and scores
/// each point on a separate validation set. Returns the report and the fit
/// at the selected point.
inline std::pair<CvReport, TfFit> holdout_select(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                                                 const Eigen::Ref<const Vector>& y,
                                                 const Eigen::Ref<const Matrix>& X_val,
                                                 const Eigen::Ref<const Matrix>& Z_val,
                                                 const Eigen::Ref<const Vector>& y_val, ResponseFamily family,
                                                 const PenaltyGrid& grid, const ModelOptions& opts = {}) {
    if (grid.size() == 0) throw DataError("penalty grid is empty");
    family.validate_response(y_val);
    auto fits = fit_grid(X, Z, y, family, grid, opts);
    CvReport rep;
    rep.grid = grid.points;
    rep.holdout = true;
    rep.folds = 1;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        rep.fold_scores.push_back({});
        if (!fits[g]) {
            rep.mean_score.push_back(std::numeric_limits<double>::infinity());
            rep.se_score.push_back(0.0);
            continue;
        }
        const Prediction pred = predict(*fits[g], X_val, Z_val);
        const double loss = prediction_loss(family, y_val, pred.mean);
        rep.mean_score.push_back(loss);
        rep.se_score.push_back(0.0);
        rep.fold_scores.back().push_back(loss);
        if (family.kind == Family::Bernoulli) rep.mean_misclassification.push_back(misclassification(y_val, pred.mean));
    }
    rep.best_index = detail::select_best(rep.mean_score, rep.grid);
    rep.best = rep.grid[rep.best_index];
    return {rep, std::move(*fits[rep.best_index])};
}

/// Smallest lambda at which the penalized GLM fit is polynomial: the dual
/// sup-norm at the unpenalized fit restricted to the null space of D^(order).
inline double glm_lambda_max(const Matrix& design, const Vector& y, ResponseFamily family, int order,
                             Eigen::Index r) {
    if (family.kind == Family::Gaussian) return lambda_max(GramProblem::from_design(design, y, r), order);
    const Eigen::Index p = design.cols() - r;
    const Matrix N = polynomial_basis(p, order);
    Matrix T = Matrix::Zero(design.cols(), order + r);
    T.topLeftCorner(p, order) = N;
    if (r > 0) T.bottomRightCorner(r, r).setIdentity();
    const Matrix reduced = design * T;
    Vector coef = Vector::Zero(T.cols());
    for (int it = 0; it < 50; ++it) {
        const GramProblem work = detail::working_problem(reduced, y, reduced * coef, family, 0);
        Matrix h = work.xtx;
        h.diagonal().array() += 1e-10 * (1.0 + h.diagonal().maxCoeff());
        const Vector next = h.ldlt().solve(work.xty);
        if (!next.allFinite()) break;
        const double step = (next - coef).norm();
        coef = next;
        if (step < 1e-10 * (1.0 + coef.norm()) || coef.norm() > 1e6) break;
    }
    const Vector eta = reduced * coef;
    Vector resid(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) resid[i] = y[i] - family.mean(eta[i]);
    const Vector grad = (design.transpose() * resid).head(p);
    const DifferenceOperator D(p, order);
    const Matrix Dd = D.to_dense();
    return (Dd * Dd.transpose()).ldlt().solve(D.apply(grad)).lpNorm<Eigen::Infinity>();
}

/// Default single-penalty grid: `count` geometric points from lambda_max down
/// to ratio * lambda_max, computed on the given data.
inline PenaltyGrid default_grid(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                                const Eigen::Ref<const Vector>& y, ResponseFamily family, int order, bool intercept,
                                int count = 50, double ratio = 1e-4) {
    const Matrix design = detail::build_design(X, Z, intercept);
    const Eigen::Index r = design.cols() - X.cols();
    const double lmax = glm_lambda_max(design, y, family, order, r);
    return PenaltyGrid::single(order, geometric_grid(lmax > 0.0 ? lmax : 1.0, count, ratio));
}

} // namespace spectf
