#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "spectf/errors.hpp"

namespace spectf {

/// B-spline basis of a given degree on [lo, hi] with the given interior knots
/// (boundary knots repeated degree + 1 times). Evaluation uses the Cox-de Boor
/// recursion; the right endpoint belongs to the last interval.
class BSplineBasis {
public:
    BSplineBasis(std::vector<double> interior, int degree = 3, double lo = 0.0, double hi = 1.0)
        : degree_(degree), lo_(lo), hi_(hi) {
        if (degree < 0) throw DimensionError("B-spline degree must be nonnegative");
        if (!(hi > lo)) throw DimensionError("B-spline domain must be a nonempty interval");
        for (int i = 0; i <= degree; ++i) knots_.push_back(lo);
        double prev = lo;
        for (double k : interior) {
            if (!(k > prev) || !(k < hi)) throw DimensionError("interior knots must be increasing inside the domain");
            knots_.push_back(k);
            prev = k;
        }
        for (int i = 0; i <= degree; ++i) knots_.push_back(hi);
    }

    /// Equispaced interior knots.
    static BSplineBasis equispaced(int interior_count, int degree = 3, double lo = 0.0, double hi = 1.0) {
        std::vector<double> interior;
        for (int i = 1; i <= interior_count; ++i)
            interior.push_back(lo + (hi - lo) * static_cast<double>(i) / (interior_count + 1));
        return BSplineBasis(interior, degree, lo, hi);
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(knots_.size()) - degree_ - 1; }
    int degree() const { return degree_; }

    /// Values of every basis function at x.
    Eigen::VectorXd evaluate(double x) const {
        if (x < lo_ || x > hi_) throw DimensionError("B-spline evaluation outside the domain");
        const auto nk = knots_.size();
        // degree-0 indicators on [t_i, t_{i+1}); the last nonempty span is closed
        std::vector<double> b(nk - 1, 0.0);
        std::size_t last_span = 0;
        for (std::size_t i = 0; i + 1 < nk; ++i)
            if (knots_[i] < knots_[i + 1]) last_span = i;
        for (std::size_t i = 0; i + 1 < nk; ++i) {
            if (knots_[i] <= x && x < knots_[i + 1]) b[i] = 1.0;
        }
        if (x == hi_) b[last_span] = 1.0;

        for (int d = 1; d <= degree_; ++d) {
            for (std::size_t i = 0; i + d + 1 < nk; ++i) {
                double v = 0.0;
                const double left = knots_[i + d] - knots_[i];
                const double right = knots_[i + d + 1] - knots_[i + 1];
                if (left > 0.0) v += (x - knots_[i]) / left * b[i];
                if (right > 0.0) v += (knots_[i + d + 1] - x) / right * b[i + 1];
                b[i] = v;
            }
        }
        Eigen::VectorXd out(size());
        for (Eigen::Index i = 0; i < size(); ++i) out[i] = b[static_cast<std::size_t>(i)];
        return out;
    }

    /// Design matrix: row j holds the basis evaluated at grid[j].
    Eigen::MatrixXd design(const Eigen::VectorXd& grid) const {
        Eigen::MatrixXd out(grid.size(), size());
        for (Eigen::Index j = 0; j < grid.size(); ++j) out.row(j) = evaluate(grid[j]).transpose();
        return out;
    }

private:
    int degree_;
    double lo_, hi_;
    std::vector<double> knots_;
};

} // namespace spectf
