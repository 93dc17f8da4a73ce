#pragma once

// Reference solvers used only by the test suites. They deliberately share no
// code path with the library solvers they check: the generalized-lasso dual is
// solved by coordinate descent on a box-constrained QP (then polished on its
// active set), and the GLM oracle is a plain unpenalized Newton-Raphson.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace spectf::oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense forward-difference matrix of order m built from binomial coefficients.
inline Matrix dense_difference(Eigen::Index p, int m) {
    Matrix D = Matrix::Zero(p - m, p);
    std::vector<double> c(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) {
        double binom = 1.0;
        for (int t = 0; t < i; ++t) binom = binom * (m - t) / (t + 1);
        c[static_cast<std::size_t>(i)] = ((m - i) % 2 == 0 ? 1.0 : -1.0) * binom;
    }
    for (Eigen::Index j = 0; j < p - m; ++j)
        for (int i = 0; i <= m; ++i) D(j, j + i) = c[static_cast<std::size_t>(i)];
    return D;
}

struct GenLassoSolution {
    Vector primal;
    Vector dual;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
};

/// minimize 1/2 a'Ha - a'b + sum_i w_i |(D a)_i|, H positive definite.
///
/// Dual: minimize 1/2 (b - D'u)' H^{-1} (b - D'u) over |u_i| <= w_i, with
/// a = H^{-1}(b - D'u). Solved by cyclic coordinate descent, then the
/// equality-constrained QP on the detected free set is solved exactly.
inline GenLassoSolution generalized_lasso_dual(const Matrix& H, const Vector& b, const Matrix& D, const Vector& w,
                                               double c0 = 0.0, int max_sweeps = 400000) {
    const Eigen::LDLT<Matrix> Hf(H);
    const Matrix HinvDt = Hf.solve(D.transpose());
    const Matrix Q = D * HinvDt;
    const Vector lin = D * Hf.solve(b);
    const Eigen::Index m = D.rows();
    Vector u = Vector::Zero(m);
    Vector Qu = Vector::Zero(m);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double grad_wo = lin[i] - (Qu[i] - Q(i, i) * u[i]);
            const double next = std::clamp(grad_wo / Q(i, i), -w[i], w[i]);
            const double d = next - u[i];
            if (d != 0.0) {
                Qu += d * Q.col(i);
                u[i] = next;
                change = std::max(change, std::abs(d));
            }
        }
        if (change < 1e-15 * (1.0 + w.maxCoeff())) break;
    }

    // Polish: fix bound coordinates, solve the free block exactly.
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(std::abs(u[i]) - w[i]) > 1e-9 * (1.0 + w[i])) free_idx.push_back(i);
    if (!free_idx.empty()) {
        const auto nf = static_cast<Eigen::Index>(free_idx.size());
        Matrix Qff(nf, nf);
        Vector rhs(nf);
        Vector fixed = u;
        for (Eigen::Index a : free_idx) fixed[a] = 0.0;
        const Vector Qfixed = Q * fixed;
        for (Eigen::Index a = 0; a < nf; ++a) {
            rhs[a] = lin[free_idx[static_cast<std::size_t>(a)]] - Qfixed[free_idx[static_cast<std::size_t>(a)]];
            for (Eigen::Index c = 0; c < nf; ++c)
                Qff(a, c) = Q(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(c)]);
        }
        const Vector uf = Qff.ldlt().solve(rhs);
        bool feasible = true;
        for (Eigen::Index a = 0; a < nf; ++a)
            if (std::abs(uf[a]) > w[free_idx[static_cast<std::size_t>(a)]] * (1.0 + 1e-12)) feasible = false;
        if (feasible && uf.allFinite())
            for (Eigen::Index a = 0; a < nf; ++a) u[free_idx[static_cast<std::size_t>(a)]] = uf[a];
    }

    GenLassoSolution out;
    out.dual = u;
    out.primal = Hf.solve(b - D.transpose() * u);
    const Vector& a = out.primal;
    out.primal_objective = c0 + 0.5 * a.dot(H * a) - a.dot(b) + w.dot((D * a).cwiseAbs());
    const Vector resid = b - D.transpose() * u;
    out.dual_objective = c0 - 0.5 * resid.dot(Hf.solve(resid));
    return out;
}

/// Fused-lasso reference: identity design, first differences.
inline Vector fused_lasso(const Vector& z, double lam) {
    const Eigen::Index m = z.size();
    if (m == 1 || lam == 0.0) return z;
    const Matrix H = Matrix::Identity(m, m);
    const Matrix D = dense_difference(m, 1);
    return generalized_lasso_dual(H, z, D, Vector::Constant(m - 1, lam)).primal;
}

/// Unpenalized Newton-Raphson for canonical-link Bernoulli (logit) or Poisson (log).
inline Vector glm_newton(const Matrix& X, const Vector& y, bool bernoulli, int iters = 200) {
    Vector beta = Vector::Zero(X.cols());
    for (int it = 0; it < iters; ++it) {
        const Vector eta = X * beta;
        Vector mu(eta.size()), w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            if (bernoulli) {
                mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
                w[i] = mu[i] * (1.0 - mu[i]);
            } else {
                mu[i] = std::exp(eta[i]);
                w[i] = mu[i];
            }
        }
        const Vector grad = X.transpose() * (y - mu);
        const Matrix hess = X.transpose() * w.asDiagonal() * X;
        const Vector step = hess.ldlt().solve(grad);
        beta += step;
        if (step.norm() < 1e-13 * (1.0 + beta.norm())) break;
    }
    return beta;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = nd(rng);
    return M;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

} // namespace spectf::oracle

namespace spectf::oracle {

/// Reference optimum of 1/2||y - X a||^2 + sum_b lam_b ||D^(order_b) f||_1
/// with the last r columns of X unpenalized. Needs X of full column rank.
inline GenLassoSolution trend_filter_reference(const Matrix& X, const Vector& y,
                                               const std::vector<std::pair<int, double>>& terms, Eigen::Index r) {
    const Eigen::Index p = X.cols() - r;
    Eigen::Index rows = 0;
    for (const auto& t : terms) rows += p - t.first;
    Matrix D = Matrix::Zero(rows, X.cols());
    Vector w(rows);
    Eigen::Index off = 0;
    for (const auto& [order, lam] : terms) {
        D.block(off, 0, p - order, p) = dense_difference(p, order);
        w.segment(off, p - order).setConstant(lam);
        off += p - order;
    }
    return generalized_lasso_dual(X.transpose() * X, X.transpose() * y, D, w, 0.5 * y.squaredNorm());
}

} // namespace spectf::oracle
