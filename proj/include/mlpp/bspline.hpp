#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mlpp/error.hpp"

namespace mlpp {

/// Clamped B-spline basis of a given order on [lo, hi] with equally spaced interior knots.
///
/// Order 4 gives cubic splines. The basis has `size` functions, which requires
/// `size - order` interior knots.
template <typename Scalar = double>
class BSplineBasis {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    BSplineBasis(Scalar lo, Scalar hi, Eigen::Index size, int order = 4) : order_(order), size_(size) {
        if (!(hi > lo)) throw InputError("B-spline domain must satisfy lo < hi");
        if (size < order) throw DimensionError("B-spline basis size must be at least the spline order");
        const Eigen::Index interior = size - order;
        knots_.resize(size + order);
        for (int j = 0; j < order; ++j) {
            knots_(j) = lo;
            knots_(size + j) = hi;
        }
        for (Eigen::Index j = 1; j <= interior; ++j)
            knots_(order - 1 + j) = lo + (hi - lo) * Scalar(j) / Scalar(interior + 1);
    }

    Eigen::Index size() const { return size_; }
    int order() const { return order_; }
    const Vector& knots() const { return knots_; }

    /// Values of every basis function (or its `deriv`-th derivative) at x.
    Vector evaluate(Scalar x, int deriv = 0) const { return evaluate_order(x, order_, deriv); }

    /// Collocation matrix: rows are points, columns basis functions.
    template <typename Derived>
    Matrix design(const Eigen::MatrixBase<Derived>& points, int deriv = 0) const {
        Matrix out(points.size(), size_);
        for (Eigen::Index r = 0; r < points.size(); ++r) out.row(r) = evaluate(points(r), deriv).transpose();
        return out;
    }

    /// Gram matrix of second derivatives, integral of B_i'' B_j'' over the domain.
    Matrix roughness_penalty() const {
        // B'' is piecewise linear for cubics, so a 3-point Gauss rule per knot span is exact for order <= 5.
        static constexpr double nodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
        static constexpr double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        Matrix penalty = Matrix::Zero(size_, size_);
        for (Eigen::Index s = order_ - 1; s < size_; ++s) {
            const Scalar a = knots_(s), b = knots_(s + 1);
            if (!(b > a)) continue;
            for (int q = 0; q < 3; ++q) {
                const Scalar x = (a + b) / 2 + (b - a) / 2 * Scalar(nodes[q]);
                const Vector d2 = evaluate(x, 2);
                penalty.noalias() += Scalar(weights[q]) * (b - a) / 2 * d2 * d2.transpose();
            }
        }
        return penalty;
    }

private:
    // Index of the knot span containing x, closed on the right at the last span.
    Eigen::Index span(Scalar x) const {
        const Eigen::Index last = size_ - 1;
        if (x >= knots_(last + 1)) return last;
        Eigen::Index lo = order_ - 1, hi = last + 1;
        while (hi - lo > 1) {
            const Eigen::Index mid = (lo + hi) / 2;
            if (x < knots_(mid)) hi = mid;
            else lo = mid;
        }
        return lo;
    }

    // Functions of order k (degree k-1) indexed 0..(knots - k - 1), derivative order deriv.
    Vector evaluate_order(Scalar x, int k, int deriv) const {
        const Eigen::Index count = knots_.size() - k;
        Vector out = Vector::Zero(count);
        if (deriv >= k) return out;
        if (deriv == 0) {
            Vector prev = Vector::Zero(knots_.size() - 1);
            prev(span(x)) = 1;
            for (int p = 2; p <= k; ++p) {
                Vector next = Vector::Zero(knots_.size() - p);
                for (Eigen::Index i = 0; i < next.size(); ++i) {
                    Scalar v = 0;
                    const Scalar d1 = knots_(i + p - 1) - knots_(i);
                    const Scalar d2 = knots_(i + p) - knots_(i + 1);
                    if (d1 > 0) v += (x - knots_(i)) / d1 * prev(i);
                    if (d2 > 0) v += (knots_(i + p) - x) / d2 * prev(i + 1);
                    next(i) = v;
                }
                prev = std::move(next);
            }
            return prev;
        }
        const Vector lower = evaluate_order(x, k - 1, deriv - 1);
        for (Eigen::Index i = 0; i < count; ++i) {
            Scalar v = 0;
            const Scalar d1 = knots_(i + k - 1) - knots_(i);
            const Scalar d2 = knots_(i + k) - knots_(i + 1);
            if (d1 > 0) v += Scalar(k - 1) / d1 * lower(i);
            if (d2 > 0) v -= Scalar(k - 1) / d2 * lower(i + 1);
            out(i) = v;
        }
        return out;
    }

    int order_;
    Eigen::Index size_;
    Vector knots_;
};

}  // namespace mlpp
