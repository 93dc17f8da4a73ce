#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "spectf/errors.hpp"

namespace spectf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric banded matrix, lower bands stored column-major:
/// band(d, j) holds A(j + d, j) for d = 0..bandwidth.
class BandedSymmetric {
public:
    BandedSymmetric(Eigen::Index n, Eigen::Index bandwidth)
        : n_(n), bw_(bandwidth), bands_(Matrix::Zero(bandwidth + 1, n)) {}

    Eigen::Index size() const { return n_; }
    Eigen::Index bandwidth() const { return bw_; }

    double& band(Eigen::Index d, Eigen::Index j) { return bands_(d, j); }
    double band(Eigen::Index d, Eigen::Index j) const { return bands_(d, j); }

    double operator()(Eigen::Index i, Eigen::Index j) const {
        if (i < j) std::swap(i, j);
        const Eigen::Index d = i - j;
        return d > bw_ ? 0.0 : bands_(d, j);
    }

    Matrix to_dense() const {
        Matrix out = Matrix::Zero(n_, n_);
        for (Eigen::Index j = 0; j < n_; ++j) {
            for (Eigen::Index d = 0; d <= bw_ && j + d < n_; ++d) {
                out(j + d, j) = bands_(d, j);
                out(j, j + d) = bands_(d, j);
            }
        }
        return out;
    }

    /// target += scale * this, on the leading n x n block.
    void add_to(Matrix& target, double scale, Eigen::Index offset = 0) const {
        for (Eigen::Index j = 0; j < n_; ++j) {
            for (Eigen::Index d = 0; d <= bw_ && j + d < n_; ++d) {
                const double v = scale * bands_(d, j);
                target(offset + j + d, offset + j) += v;
                if (d != 0) target(offset + j, offset + j + d) += v;
            }
        }
    }

private:
    Eigen::Index n_;
    Eigen::Index bw_;
    Matrix bands_;
};

/// Forward-difference operator of a given order on an index grid of length p.
///
/// Every row carries the same stencil, so the operator is stored as its
/// (order + 1)-long stencil: row j maps x to sum_i stencil[i] * x[j + i].
/// Order 0 is the identity; it is used internally as the constraint operator
/// when the first difference is penalized.
class DifferenceOperator {
public:
    DifferenceOperator() = default;

    DifferenceOperator(Eigen::Index p, int order) : p_(p), order_(order) {
        if (order < 0) throw DimensionError("difference order must be nonnegative");
        if (p <= order)
            throw DimensionError("difference operator of order " + std::to_string(order) +
                                 " needs more than " + std::to_string(order) +
                                 " grid points, got p = " + std::to_string(p));
        // D^(m+1) = D^(1) D^(m): convolve the stencil with (-1, +1).
        stencil_ = Vector::Ones(1);
        for (int m = 0; m < order; ++m) {
            Vector next = Vector::Zero(stencil_.size() + 1);
            next.head(stencil_.size()) -= stencil_;
            next.tail(stencil_.size()) += stencil_;
            stencil_ = std::move(next);
        }
    }

    int order() const { return order_; }
    Eigen::Index cols() const { return p_; }
    Eigen::Index rows() const { return p_ - order_; }
    const Vector& stencil() const { return stencil_; }

    /// Same operator with every row multiplied by -1.
    DifferenceOperator negated() const {
        DifferenceOperator out = *this;
        out.stencil_ = -stencil_;
        return out;
    }

    Vector apply(const Eigen::Ref<const Vector>& x) const {
        if (x.size() != p_) throw DimensionError("apply: expected vector of length " + std::to_string(p_));
        Vector out = Vector::Zero(rows());
        for (Eigen::Index j = 0; j < rows(); ++j) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i <= order_; ++i) acc += stencil_[i] * x[j + i];
            out[j] = acc;
        }
        return out;
    }

    Vector apply_transpose(const Eigen::Ref<const Vector>& v) const {
        if (v.size() != rows())
            throw DimensionError("apply_transpose: expected vector of length " + std::to_string(rows()));
        Vector out = Vector::Zero(p_);
        for (Eigen::Index j = 0; j < rows(); ++j) {
            for (Eigen::Index i = 0; i <= order_; ++i) out[j + i] += stencil_[i] * v[j];
        }
        return out;
    }

    /// D^T D, bandwidth `order` on each side of the diagonal.
    BandedSymmetric gram() const {
        BandedSymmetric g(p_, order_);
        for (Eigen::Index row = 0; row < rows(); ++row) {
            for (Eigen::Index a = 0; a <= order_; ++a) {
                for (Eigen::Index b = 0; b <= a; ++b) {
                    // entry (row + a, row + b) with a >= b
                    g.band(a - b, row + b) += stencil_[a] * stencil_[b];
                }
            }
        }
        return g;
    }

    Matrix to_dense() const {
        Matrix out = Matrix::Zero(rows(), p_);
        for (Eigen::Index j = 0; j < rows(); ++j) out.row(j).segment(j, order_ + 1) = stencil_.transpose();
        return out;
    }

private:
    Eigen::Index p_ = 0;
    int order_ = 0;
    Vector stencil_;
};

/// Public constructor for the penalty operator D^(order); order >= 1, p > order.
inline DifferenceOperator build_difference_operator(Eigen::Index p, int order) {
    if (order < 1) throw DimensionError("difference order must be at least 1");
    return DifferenceOperator(p, order);
}

/// One or more difference operators on the same grid stacked row-wise, with r
/// zero columns appended for unpenalized scalar coefficients.
class AugmentedOperator {
public:
    AugmentedOperator(std::vector<DifferenceOperator> blocks, Eigen::Index r)
        : blocks_(std::move(blocks)), r_(r) {
        if (blocks_.empty()) throw DimensionError("augmented operator needs at least one block");
        if (r < 0) throw DimensionError("scalar covariate count must be nonnegative");
        p_ = blocks_.front().cols();
        Eigen::Index off = 0;
        for (const auto& b : blocks_) {
            if (b.cols() != p_) throw DimensionError("stacked operators must share the grid length p");
            offsets_.push_back(off);
            off += b.rows();
        }
        rows_ = off;
    }

    AugmentedOperator(DifferenceOperator base, Eigen::Index r)
        : AugmentedOperator(std::vector<DifferenceOperator>{std::move(base)}, r) {}

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return p_ + r_; }
    Eigen::Index grid_size() const { return p_; }
    Eigen::Index scalar_count() const { return r_; }
    bool stacked() const { return blocks_.size() > 1; }

    const std::vector<DifferenceOperator>& blocks() const { return blocks_; }
    Eigen::Index block_offset(std::size_t b) const { return offsets_.at(b); }

    Vector apply(const Eigen::Ref<const Vector>& theta) const {
        if (theta.size() != cols()) throw DimensionError("augmented apply: dimension mismatch");
        Vector out(rows_);
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            out.segment(offsets_[b], blocks_[b].rows()) = blocks_[b].apply(theta.head(p_));
        return out;
    }

    Vector apply_transpose(const Eigen::Ref<const Vector>& v) const {
        if (v.size() != rows_) throw DimensionError("augmented apply_transpose: dimension mismatch");
        Vector out = Vector::Zero(cols());
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            out.head(p_) += blocks_[b].apply_transpose(v.segment(offsets_[b], blocks_[b].rows()));
        return out;
    }

    /// Dense D^T D with per-block weights (defaults to 1 for every block).
    Matrix gram(const std::vector<double>& weights = {}) const {
        Matrix out = Matrix::Zero(cols(), cols());
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            blocks_[b].gram().add_to(out, weights.empty() ? 1.0 : weights.at(b));
        return out;
    }

    Matrix to_dense() const {
        Matrix out = Matrix::Zero(rows_, cols());
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            out.block(offsets_[b], 0, blocks_[b].rows(), p_) = blocks_[b].to_dense();
        return out;
    }

private:
    std::vector<DifferenceOperator> blocks_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index p_ = 0;
    Eigen::Index r_ = 0;
    Eigen::Index rows_ = 0;
};

inline AugmentedOperator augment_operator(const DifferenceOperator& base, Eigen::Index r) {
    return AugmentedOperator(base, r);
}

inline AugmentedOperator augment_operator(const DifferenceOperator& first, const DifferenceOperator& second,
                                          Eigen::Index r) {
    return AugmentedOperator(std::vector<DifferenceOperator>{first, second}, r);
}

} // namespace spectf
