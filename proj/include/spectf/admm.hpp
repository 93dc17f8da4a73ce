#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spectf/diffops.hpp"
#include "spectf/errors.hpp"
#include "spectf/fused1d.hpp"

namespace spectf {

/// One penalty term lam * ||D^(order) f||_1, where `order` is the derivative
/// order being penalized (order = k + 1).
struct PenaltyTerm {
    int order = 1;
    double lambda = 0.0;

    bool operator==(const PenaltyTerm&) const = default;
};

/// One or two penalty terms on the functional coefficient.
struct PenaltySpec {
    std::vector<PenaltyTerm> terms;

    static PenaltySpec single(int order, double lambda) { return PenaltySpec{{{order, lambda}}}; }
    static PenaltySpec mixed(int order1, double lambda1, int order2, double lambda2) {
        return PenaltySpec{{{order1, lambda1}, {order2, lambda2}}};
    }

    double total_strength() const {
        double s = 0.0;
        for (const auto& t : terms) s += t.lambda;
        return s;
    }

    void validate() const {
        if (terms.empty() || terms.size() > 2) throw DimensionError("penalty must have one or two terms");
        for (const auto& t : terms) {
            if (t.order < 1) throw DimensionError("penalized derivative order must be at least 1");
            if (!(t.lambda >= 0.0) || !std::isfinite(t.lambda))
                throw DataError("penalty weights must be finite and nonnegative");
        }
        if (terms.size() == 2 && terms[0].order == terms[1].order)
            throw DimensionError("the two penalty terms must use distinct orders");
    }

    bool operator==(const PenaltySpec&) const = default;
};

/// EqualToLambda: rho = lam for one term, rho = max(lam_1, lam_2) shared by
/// both blocks of a mixed penalty. PerBlock: block b uses rho_b = lam_b.
/// Custom: one user-supplied rho.
enum class RhoRule { EqualToLambda, PerBlock, Custom };

struct AdmmState {
    Vector alpha;  // f on the grid, then the scalar coefficients
    Vector delta;  // auxiliary variable, one block per penalty term
    Vector u;      // scaled dual
    int iter = 0;
    double primal_res = 0.0;
    double dual_res = 0.0;
    std::vector<double> rho;  // per penalty block
    double objective = 0.0;
    bool converged = false;
};

struct AdmmConfig {
    RhoRule rho_rule = RhoRule::EqualToLambda;
    double rho = 1.0;  // used when rho_rule == Custom
    int max_iter = 5000;
    double eps_abs = 1e-5;
    double eps_rel = 1e-4;
    // over-relaxation factor in (0, 2); 1 is plain ADMM
    double relaxation = 1.0;
    std::optional<AdmmState> warm_start;

    void validate() const {
        if (!(eps_abs > 0.0) || !(eps_rel > 0.0)) throw DataError("ADMM tolerances must be positive");
        if (max_iter < 1) throw DataError("max_iter must be at least 1");
        if (!(relaxation > 0.0 && relaxation < 2.0)) throw DataError("relaxation must lie in (0, 2)");
        if (rho_rule == RhoRule::Custom && !(rho > 0.0)) throw DataError("custom rho must be positive");
    }
};

/// Least-squares data in sufficient-statistic form: the loss is
/// 1/2 ||y - X a||^2 = 1/2 (yty - 2 a'Xty + a'XtX a).
struct GramProblem {
    Matrix xtx;
    Vector xty;
    double yty = 0.0;
    Eigen::Index p = 0;  // functional columns
    Eigen::Index r = 0;  // trailing unpenalized columns

    static GramProblem from_design(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                   Eigen::Index scalar_count = 0) {
        if (X.rows() != y.size()) throw DimensionError("design has " + std::to_string(X.rows()) +
                                                       " rows but y has " + std::to_string(y.size()));
        if (X.rows() < 1) throw DimensionError("need at least one observation");
        if (scalar_count < 0 || scalar_count > X.cols()) throw DimensionError("invalid scalar covariate count");
        if (!X.allFinite() || !y.allFinite()) throw DataError("design or response contains NaN/Inf");
        GramProblem g;
        g.xtx = Matrix::Zero(X.cols(), X.cols());
        g.xtx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
        g.xtx = g.xtx.selfadjointView<Eigen::Lower>();
        g.xty = X.transpose() * y;
        g.yty = y.squaredNorm();
        g.p = X.cols() - scalar_count;
        g.r = scalar_count;
        return g;
    }

    Eigen::Index cols() const { return p + r; }

    double loss(const Vector& alpha) const {
        return 0.5 * std::max(0.0, yty - 2.0 * alpha.dot(xty) + alpha.dot(xtx * alpha));
    }
};

/// Penalty value sum_b lam_b ||D^(order_b) f||_1.
inline double penalty_value(const PenaltySpec& penalty, const Vector& alpha, Eigen::Index p) {
    double total = 0.0;
    for (const auto& t : penalty.terms) {
        if (t.lambda == 0.0) continue;
        total += t.lambda * DifferenceOperator(p, t.order).apply(alpha.head(p)).lpNorm<1>();
    }
    return total;
}

/// 1/2 ||y - X a||^2 + sum_b lam_b ||D^(order_b) f||_1.
inline double penalized_objective(const GramProblem& prob, const PenaltySpec& penalty, const Vector& alpha) {
    return prob.loss(alpha) + penalty_value(penalty, alpha, prob.p);
}

/// Stacked constraint operator (each penalized order reduced by one) and its
/// Gram matrix. Depends only on the penalty orders, so a lambda path shares one.
class ConstraintSystem {
public:
    ConstraintSystem(const PenaltySpec& penalty, Eigen::Index p, Eigen::Index r)
        : op_(make_blocks(penalty, p), r) {
        for (const auto& t : penalty.terms) orders_.push_back(t.order);
        for (const auto& b : op_.blocks()) block_grams_.push_back(b.gram());
    }

    const AugmentedOperator& op() const { return op_; }

    /// sum_b rho_b C_b'C_b as a dense (p + r) square matrix.
    Matrix gram(const std::vector<double>& rho) const {
        Matrix out = Matrix::Zero(op_.cols(), op_.cols());
        for (std::size_t b = 0; b < block_grams_.size(); ++b) block_grams_[b].add_to(out, rho.at(b));
        return out;
    }

    bool matches(const PenaltySpec& penalty, Eigen::Index p, Eigen::Index r) const {
        if (penalty.terms.size() != orders_.size() || p != op_.grid_size() || r != op_.scalar_count()) return false;
        for (std::size_t i = 0; i < orders_.size(); ++i)
            if (penalty.terms[i].order != orders_[i]) return false;
        return true;
    }

private:
    static std::vector<DifferenceOperator> make_blocks(const PenaltySpec& penalty, Eigen::Index p) {
        penalty.validate();
        std::vector<DifferenceOperator> blocks;
        for (const auto& t : penalty.terms) {
            if (p < t.order + 1)
                throw DimensionError("grid of length " + std::to_string(p) + " too short for order " +
                                     std::to_string(t.order));
            blocks.emplace_back(p, t.order - 1);
        }
        return blocks;
    }

    AugmentedOperator op_;
    std::vector<BandedSymmetric> block_grams_;
    std::vector<int> orders_;
};

/// Augmented-Lagrangian weight for each penalty block.
inline std::vector<double> resolve_rho(const PenaltySpec& penalty, const AdmmConfig& config) {
    const std::size_t nb = penalty.terms.size();
    if (config.rho_rule == RhoRule::Custom) return std::vector<double>(nb, config.rho);
    double largest = 0.0;
    for (const auto& t : penalty.terms) largest = std::max(largest, t.lambda);
    // rho = lam degenerates at lam = 0; any positive value gives the least-squares fit
    if (largest == 0.0) largest = 1.0;
    std::vector<double> rho(nb, largest);
    if (config.rho_rule == RhoRule::PerBlock)
        for (std::size_t b = 0; b < nb; ++b)
            if (penalty.terms[b].lambda > 0.0) rho[b] = penalty.terms[b].lambda;
    return rho;
}

/// Cholesky of XtX + rho * G, with one ridge-jitter retry.
inline Eigen::LLT<Matrix> factorize_normal(const Matrix& xtx, const Matrix& penalty_gram, double rho = 1.0) {
    Matrix system = xtx + rho * penalty_gram;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() == Eigen::Success) return llt;
    const double jitter = 1e-10 * system.trace() / static_cast<double>(system.rows());
    system.diagonal().array() += jitter;
    llt.compute(system);
    if (llt.info() != Eigen::Success)
        throw NumericalError("normal matrix X'X + rho D'D is singular even after ridge jitter; "
                             "add a ridge term or increase lambda");
    return llt;
}

/// Specialized ADMM for the functional trend-filtering problem.
///
/// A penalty on derivative order k+1 is split as C a = d with C = D^(k) and a
/// fused-lasso penalty on d, so the d-update is an exact 1-D fused lasso.
/// The factorization is computed once at construction; `solve` can then be
/// called repeatedly with different X'y (bootstrap replicates) and warm starts.
class AdmmSolver {
public:
    AdmmSolver(const GramProblem& prob, PenaltySpec penalty, const AdmmConfig& config,
               const ConstraintSystem* shared_constraints = nullptr)
        : prob_(&prob), penalty_(std::move(penalty)), config_(config) {
        penalty_.validate();
        config_.validate();
        if (prob.xtx.rows() != prob.cols() || prob.xty.size() != prob.cols())
            throw DimensionError("inconsistent Gram problem");
        if (shared_constraints != nullptr && shared_constraints->matches(penalty_, prob.p, prob.r)) {
            constraints_ = shared_constraints;
        } else {
            owned_.emplace(penalty_, prob.p, prob.r);
            constraints_ = &*owned_;
        }
        rho_ = resolve_rho(penalty_, config_);
        if (penalty_.total_strength() == 0.0) {
            Eigen::LLT<Matrix> plain(prob.xtx);
            if (plain.info() == Eigen::Success) least_squares_ = std::move(plain);
        }
        llt_ = factorize_normal(prob.xtx, constraints_->gram(rho_));
        const AugmentedOperator& op = constraints_->op();
        row_rho_.resize(op.rows());
        for (std::size_t b = 0; b < rho_.size(); ++b)
            row_rho_.segment(op.block_offset(b), op.blocks()[b].rows()).setConstant(rho_[b]);
    }

    const std::vector<double>& rho() const { return rho_; }
    const PenaltySpec& penalty() const { return penalty_; }

    AdmmState solve() {
        return solve(prob_->xty, prob_->yty, config_.warm_start ? &*config_.warm_start : nullptr);
    }

    /// Same X'X and penalty, new right-hand side X'y (and y'y for the objective).
    AdmmState solve(const Vector& xty, double yty, const AdmmState* warm) {
        const AugmentedOperator& op = constraints_->op();
        const Eigen::Index n_cols = prob_->cols();
        const Eigen::Index m = op.rows();

        AdmmState s;
        s.rho = rho_;
        if (least_squares_) {
            // no penalty and X'X invertible: the exact least-squares fit
            s.alpha = least_squares_->solve(xty);
            s.delta = op.apply(s.alpha);
            s.u = Vector::Zero(m);
            s.converged = true;
            s.objective = 0.5 * std::max(0.0, yty - s.alpha.dot(xty));
            return s;
        }
        if (warm != nullptr && warm->alpha.size() == n_cols && warm->delta.size() == m && warm->u.size() == m) {
            s.alpha = warm->alpha;
            s.delta = warm->delta;
            // scaled dual is y/rho; keep the unscaled dual fixed across a change of rho
            s.u = warm->u;
            if (warm->rho.size() == rho_.size()) {
                for (std::size_t b = 0; b < rho_.size(); ++b)
                    s.u.segment(op.block_offset(b), op.blocks()[b].rows()) *= warm->rho[b] / rho_[b];
            }
        } else if (warm != nullptr && warm->alpha.size() == n_cols) {
            s.alpha = warm->alpha;
            s.delta = op.apply(s.alpha);
            s.u = Vector::Zero(m);
        } else {
            s.alpha = Vector::Zero(n_cols);
            s.delta = Vector::Zero(m);
            s.u = Vector::Zero(m);
        }

        const auto& blocks = op.blocks();
        Vector c_alpha(m), relaxed(m), target(m), delta_old(m), rhs(n_cols);
        const double sqrt_m = std::sqrt(static_cast<double>(m));
        const double sqrt_n = std::sqrt(static_cast<double>(n_cols));

        for (int it = 1; it <= config_.max_iter; ++it) {
            rhs = xty + op.apply_transpose(row_rho_.cwiseProduct(s.delta - s.u));
            s.alpha = llt_.solve(rhs);

            c_alpha = op.apply(s.alpha);
            const double a = config_.relaxation;
            if (a != 1.0) relaxed = a * c_alpha + (1.0 - a) * s.delta;
            const Vector& mix = a != 1.0 ? relaxed : c_alpha;
            target = mix + s.u;
            delta_old = s.delta;
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const Eigen::Index off = op.block_offset(b);
                const Eigen::Index len = blocks[b].rows();
                fused_.solve(target.data() + off, len, penalty_.terms[b].lambda / rho_[b], s.delta.data() + off);
            }
            s.u += mix - s.delta;

            s.iter = it;
            s.primal_res = (c_alpha - s.delta).norm();
            s.dual_res = op.apply_transpose(row_rho_.cwiseProduct(s.delta - delta_old)).norm();
            const double eps_pri = sqrt_m * config_.eps_abs + config_.eps_rel * std::max(c_alpha.norm(), s.delta.norm());
            const double eps_dual = sqrt_n * config_.eps_abs + config_.eps_rel * op.apply_transpose(row_rho_.cwiseProduct(s.u)).norm();
            if (s.primal_res <= eps_pri && s.dual_res <= eps_dual) {
                s.converged = true;
                break;
            }
        }
        const double loss = 0.5 * std::max(0.0, yty - 2.0 * s.alpha.dot(xty) + s.alpha.dot(prob_->xtx * s.alpha));
        s.objective = loss + penalty_value(penalty_, s.alpha, prob_->p);
        return s;
    }

private:

    const GramProblem* prob_;
    PenaltySpec penalty_;
    AdmmConfig config_;
    std::optional<ConstraintSystem> owned_;
    const ConstraintSystem* constraints_ = nullptr;
    std::vector<double> rho_;
    Vector row_rho_;
    Eigen::LLT<Matrix> llt_;
    std::optional<Eigen::LLT<Matrix>> least_squares_;
    FusedLassoSolver fused_;
};

/// Solve 1/2 ||y - X a||^2 + sum lam_b ||D^(order_b) f||_1, where the last
/// `scalar_count` columns of X are unpenalized.
inline AdmmState admm_solve(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                            const PenaltySpec& penalty, const AdmmConfig& config = {},
                            Eigen::Index scalar_count = 0) {
    const GramProblem prob = GramProblem::from_design(X, y, scalar_count);
    AdmmSolver solver(prob, penalty, config);
    return solver.solve();
}

/// Two-term variant; the stacked operator splits the d-update into one fused
/// lasso per block.
inline AdmmState mixed_solve(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                             const PenaltySpec& penalty, const AdmmConfig& config = {},
                             Eigen::Index scalar_count = 0) {
    if (penalty.terms.size() != 2) throw DimensionError("mixed_solve needs exactly two penalty terms");
    return admm_solve(X, y, penalty, config, scalar_count);
}

struct PathPoint {
    PenaltySpec penalty;
    std::optional<AdmmState> state;
    std::string error;

    bool ok() const { return state.has_value(); }
};

/// Warm-started sweep over a grid sorted by decreasing total penalty. The
/// constraint Gram is shared across the path; X'X + rho D'D is refactored at
/// every point because rho follows lambda.
inline std::vector<PathPoint> solve_path(const GramProblem& prob, const std::vector<PenaltySpec>& grid,
                                         const AdmmConfig& config = {}) {
    if (grid.empty()) throw DimensionError("penalty grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i].total_strength() > grid[i - 1].total_strength())
            throw DataError("penalty grid must be sorted by decreasing strength");

    std::vector<PathPoint> out;
    out.reserve(grid.size());
    std::optional<ConstraintSystem> shared;
    std::optional<AdmmState> previous = config.warm_start;
    for (const auto& pen : grid) {
        PathPoint point{pen, std::nullopt, {}};
        try {
            if (!shared || !shared->matches(pen, prob.p, prob.r)) shared.emplace(pen, prob.p, prob.r);
            AdmmSolver solver(prob, pen, config, &*shared);
            point.state = solver.solve(prob.xty, prob.yty, previous ? &*previous : nullptr);
            previous = point.state;
        } catch (const Error& e) {
            point.error = e.what();
        }
        out.push_back(std::move(point));
    }
    return out;
}

inline std::vector<PathPoint> solve_path(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                         const std::vector<PenaltySpec>& grid, const AdmmConfig& config = {},
                                         Eigen::Index scalar_count = 0) {
    const GramProblem prob = GramProblem::from_design(X, y, scalar_count);
    return solve_path(prob, grid, config);
}

/// Orthonormal basis of the polynomials of degree < order on the index grid
/// (the null space of D^(order)).
inline Matrix polynomial_basis(Eigen::Index p, int order) {
    Matrix V(p, order);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double t = p > 1 ? 2.0 * static_cast<double>(j) / static_cast<double>(p - 1) - 1.0 : 0.0;
        double v = 1.0;
        for (int d = 0; d < order; ++d) {
            V(j, d) = v;
            v *= t;
        }
    }
    Eigen::HouseholderQR<Matrix> qr(V);
    return qr.householderQ() * Matrix::Identity(p, order);
}

/// Coefficients of the fit restricted to polynomial f (D f = 0) with free
/// scalar coefficients.
inline Vector polynomial_fit(const GramProblem& prob, int order) {
    const Matrix N = polynomial_basis(prob.p, order);
    Matrix T = Matrix::Zero(prob.cols(), order + prob.r);
    T.topLeftCorner(prob.p, order) = N;
    if (prob.r > 0) T.bottomRightCorner(prob.r, prob.r).setIdentity();
    const Matrix reduced = T.transpose() * prob.xtx * T;
    const Vector coef = reduced.completeOrthogonalDecomposition().solve(T.transpose() * prob.xty);
    return T * coef;
}

/// Smallest lambda at which the single-penalty solution is polynomial: the
/// sup-norm of the dual variable at the polynomial-restricted fit,
/// ||(D D')^{-1} D X'(y - X a0)||_inf.
inline double lambda_max(const GramProblem& prob, int order) {
    if (order < 1 || prob.p <= order) throw DimensionError("lambda_max: invalid order for grid length");
    const Vector a0 = polynomial_fit(prob, order);
    const Vector grad = (prob.xty - prob.xtx * a0).head(prob.p);
    const DifferenceOperator D(prob.p, order);
    const Matrix Dd = D.to_dense();
    const Matrix DDt = Dd * Dd.transpose();
    const Vector dual = DDt.ldlt().solve(D.apply(grad));
    return dual.lpNorm<Eigen::Infinity>();
}

inline double lambda_max(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, int order,
                         Eigen::Index scalar_count = 0) {
    return lambda_max(GramProblem::from_design(X, y, scalar_count), order);
}

/// Geometric grid from lmax down to ratio * lmax.
inline std::vector<double> geometric_grid(double lmax, int count = 50, double ratio = 1e-4) {
    if (count < 1) throw DataError("grid needs at least one point");
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lmax;
        return out;
    }
    for (int i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] = lmax * std::pow(ratio, static_cast<double>(i) / (count - 1));
    return out;
}

} // namespace spectf
