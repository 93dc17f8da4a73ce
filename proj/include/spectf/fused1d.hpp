#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectf/errors.hpp"

namespace spectf {

/// Exact solver for the 1-D fused lasso
///
///     minimize_d  1/2 ||z - d||^2 + lam * sum_j |d[j+1] - d[j]|
///
/// by dynamic programming: the forward pass keeps the derivative of the
/// running message as a piecewise-linear function, stored as a sorted list of
/// knots with per-knot slope/intercept increments, and clips it to [-lam, lam]
/// at each step. The clip points are the back-pointers used by the backward
/// pass. Linear time, up to the amortized knot scans.
///
/// The solver owns its scratch buffers so repeated calls (one per ADMM
/// iteration) do not allocate.
class FusedLassoSolver {
public:
    void solve(const double* z, Eigen::Index m, double lam, double* out) {
        if (m <= 0) return;
        if (m == 1 || lam == 0.0) {
            std::copy(z, z + m, out);
            return;
        }
        const auto n = static_cast<std::size_t>(m);
        knots_.assign(2 * n, 0.0);
        slope_.assign(2 * n, 0.0);
        icept_.assign(2 * n, 0.0);
        lower_.assign(n - 1, 0.0);
        upper_.assign(n - 1, 0.0);

        // first step by hand
        lower_[0] = z[0] - lam;
        upper_[0] = z[0] + lam;
        std::ptrdiff_t l = m - 1;
        std::ptrdiff_t r = m;
        knots_[l] = lower_[0];
        knots_[r] = upper_[0];
        slope_[l] = 1.0;
        icept_[l] = lam - z[0];
        slope_[r] = -1.0;
        icept_[r] = lam + z[0];
        double a_first = 1.0;
        double b_first = -z[1] - lam;
        double a_last = -1.0;
        double b_last = z[1] - lam;

        for (Eigen::Index k = 1; k < m - 1; ++k) {
            // lowest point where the derivative exceeds -lam
            double a_lo = a_first;
            double b_lo = b_first;
            std::ptrdiff_t lo = l;
            for (; lo <= r; ++lo) {
                if (a_lo * knots_[lo] + b_lo > -lam) break;
                a_lo += slope_[lo];
                b_lo += icept_[lo];
            }
            // highest point where the derivative is below +lam
            double a_hi = a_last;
            double b_hi = b_last;
            std::ptrdiff_t hi = r;
            for (; hi >= lo; --hi) {
                if (-a_hi * knots_[hi] - b_hi < lam) break;
                a_hi += slope_[hi];
                b_hi += icept_[hi];
            }

            lower_[k] = (-lam - b_lo) / a_lo;
            l = lo - 1;
            knots_[l] = lower_[k];

            upper_[k] = (lam + b_hi) / (-a_hi);
            r = hi + 1;
            knots_[r] = upper_[k];

            slope_[l] = a_lo;
            icept_[l] = b_lo + lam;
            slope_[r] = a_hi;
            icept_[r] = b_hi + lam;
            a_first = 1.0;
            b_first = -z[k + 1] - lam;
            a_last = -1.0;
            b_last = z[k + 1] - lam;
        }

        // last coordinate: zero of the final derivative
        double a_lo = a_first;
        double b_lo = b_first;
        for (std::ptrdiff_t lo = l; lo <= r; ++lo) {
            if (a_lo * knots_[lo] + b_lo > 0.0) break;
            a_lo += slope_[lo];
            b_lo += icept_[lo];
        }
        out[m - 1] = -b_lo / a_lo;

        for (Eigen::Index k = m - 2; k >= 0; --k) {
            const double next = out[k + 1];
            const auto ku = static_cast<std::size_t>(k);
            if (next > upper_[ku]) out[k] = upper_[ku];
            else if (next < lower_[ku]) out[k] = lower_[ku];
            else out[k] = next;
        }
    }

    Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& z, double lam) {
        Eigen::VectorXd out(z.size());
        solve(z.data(), z.size(), lam, out.data());
        return out;
    }

private:
    std::vector<double> knots_, slope_, icept_, lower_, upper_;
};

/// Minimizer of 1/2 ||z - d||^2 + lam * TV(d). Piecewise constant.
inline Eigen::VectorXd fused_lasso_1d(const Eigen::Ref<const Eigen::VectorXd>& z, double lam) {
    if (!(lam >= 0.0) || !std::isfinite(lam)) throw DataError("fused_lasso_1d: lam must be finite and nonnegative");
    if (z.size() < 1) throw DimensionError("fused_lasso_1d: empty input");
    if (!z.allFinite()) throw DataError("fused_lasso_1d: input contains NaN or Inf");
    FusedLassoSolver solver;
    return solver.solve(z, lam);
}

/// Largest violation of the fused-lasso optimality conditions at `delta`.
///
/// With c_j = sum_{i<=j} (delta_i - z_i), optimality means |c_j| <= lam at
/// every boundary, c_j = lam * sign(delta_{j+1} - delta_j) where the solution
/// jumps, and c_m = 0.
inline double kkt_check(const Eigen::Ref<const Eigen::VectorXd>& z, double lam,
                        const Eigen::Ref<const Eigen::VectorXd>& delta) {
    if (z.size() != delta.size()) throw DimensionError("kkt_check: length mismatch");
    const Eigen::Index m = z.size();
    if (m == 0) return 0.0;
    const double jump_tol = 1e-10 * (1.0 + z.cwiseAbs().maxCoeff());
    double worst = 0.0;
    double c = 0.0;
    for (Eigen::Index j = 0; j < m - 1; ++j) {
        c += delta[j] - z[j];
        const double jump = delta[j + 1] - delta[j];
        if (std::abs(jump) > jump_tol) {
            worst = std::max(worst, std::abs(c - (jump > 0 ? lam : -lam)));
        } else {
            worst = std::max(worst, std::abs(c) - lam);
        }
    }
    c += delta[m - 1] - z[m - 1];
    return std::max(worst, std::abs(c));
}

} // namespace spectf
