#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mlpp/bspline.hpp"
#include "mlpp/error.hpp"

namespace mlpp {

/// Group code of the first condition; the second condition uses kGroupB.
inline constexpr int kGroupA = 2;
inline constexpr int kGroupB = 3;

/// Multi-subject, multi-channel curves on a shared time grid.
///
/// Curves are stored row-wise: row `u * channels + i` holds subject u, channel i.
template <typename Scalar = double>
struct FunctionalDataset {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Eigen::Index subjects = 0;
    Eigen::Index channels = 0;
    Matrix values;
    Vector time_grid;
    std::vector<int> group_of;
    std::vector<std::string> subject_ids;
    std::vector<std::string> channel_ids;

    Eigen::Index timepoints() const { return time_grid.size(); }
    Eigen::Index row(Eigen::Index u, Eigen::Index i) const { return u * channels + i; }

    Eigen::Index group_a_count() const {
        return static_cast<Eigen::Index>(std::count(group_of.begin(), group_of.end(), kGroupA));
    }

    /// Throws InputError / DimensionError if any invariant is broken.
    void validate() const {
        if (subjects < 1 || channels < 1) throw DimensionError("dataset needs at least one subject and channel");
        if (values.rows() != subjects * channels)
            throw DimensionError("dataset has " + std::to_string(values.rows()) + " curves, expected " +
                                 std::to_string(subjects * channels));
        if (values.cols() != time_grid.size()) throw DimensionError("curve length differs from time grid length");
        if (time_grid.size() < 2) throw DimensionError("time grid needs at least two points");
        for (Eigen::Index t = 1; t < time_grid.size(); ++t)
            if (!(time_grid(t) > time_grid(t - 1))) throw InputError("time grid must be strictly increasing");
        if (!values.allFinite()) throw InputError("dataset contains missing or non-finite values");
        if (static_cast<Eigen::Index>(group_of.size()) != subjects) throw DimensionError("one group code per subject required");
        bool seen_a = false, seen_b = false;
        for (int d : group_of) {
            if (d != kGroupA && d != kGroupB) throw InputError("group codes must be 2 or 3");
            seen_a |= d == kGroupA;
            seen_b |= d == kGroupB;
        }
        if (!seen_a || !seen_b) throw InputError("both group codes must occur");
    }
};

/// Mean curve, retained eigenfunctions and the per-curve scores on them.
template <typename Scalar = double>
struct EigenBasis {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Vector mean_curve;
    Matrix eigenfunctions;  // T x K
    Vector eigenvalues;     // K, nonincreasing
    Vector var_explained;   // K, fraction of total variance per component
    Matrix scores;          // (U * n) x K
    Vector time_grid;
    Eigen::Index subjects = 0;
    Eigen::Index channels = 0;

    Eigen::Index components() const { return eigenfunctions.cols(); }
};

/// Trapezoidal quadrature weights for a strictly increasing grid.
template <typename Derived>
auto trapezoid_weights(const Eigen::MatrixBase<Derived>& grid) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = grid.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(n);
    if (n < 2) throw DimensionError("quadrature needs at least two grid points");
    w(0) = (grid(1) - grid(0)) / 2;
    w(n - 1) = (grid(n - 1) - grid(n - 2)) / 2;
    for (Eigen::Index t = 1; t + 1 < n; ++t) w(t) = (grid(t + 1) - grid(t - 1)) / 2;
    return w;
}

/// Quadrature inner product between curves sampled on `grid`.
template <typename A, typename B, typename W>
auto inner_product(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const Eigen::MatrixBase<W>& weights) {
    return (a.array() * b.array() * weights.array()).sum();
}

struct SmoothingOptions {
    Eigen::Index basis_size = 20;
    /// Fixed roughness penalty; when empty the penalty is chosen by GCV.
    std::optional<double> penalty;
    double gcv_min = 1e-6;
    double gcv_max = 1e3;
    int gcv_points = 25;
};

/// Penalised cubic B-spline smoother on a fixed grid.
template <typename Scalar = double>
class SplineSmoother {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    SplineSmoother(const Vector& grid, Eigen::Index basis_size)
        : basis_(grid(0), grid(grid.size() - 1), basis_size) {
        if (basis_size < 4) throw DimensionError("basis size must be at least 4");
        if (basis_size > grid.size()) throw DimensionError("basis size exceeds the number of time points");
        design_ = basis_.design(grid);
        gram_ = design_.transpose() * design_;
        penalty_ = basis_.roughness_penalty();
    }

    /// Hat matrix mapping raw samples to fitted samples for a given penalty.
    Matrix hat_matrix(Scalar lambda) const {
        const Matrix system = gram_ + lambda * penalty_;
        Eigen::LDLT<Matrix> ldlt(system);
        if (ldlt.info() != Eigen::Success) throw NumericalError("penalised spline system is singular");
        const Matrix coef_map = ldlt.solve(design_.transpose());
        return design_ * coef_map;
    }

    /// Generalised cross-validation score pooled over all rows of `curves`.
    Scalar gcv(const Matrix& curves, Scalar lambda) const {
        const Matrix hat = hat_matrix(lambda);
        const Scalar T = Scalar(curves.cols());
        const Scalar dof = hat.trace();
        if (T - dof <= Scalar(1e-8) * T) return std::numeric_limits<Scalar>::infinity();
        const Scalar rss = (curves - curves * hat.transpose()).squaredNorm() / Scalar(curves.rows());
        return T * rss / ((T - dof) * (T - dof));
    }

    /// Penalty minimising GCV over a log-spaced grid.
    Scalar select_penalty(const Matrix& curves, const SmoothingOptions& opt) const {
        Scalar best = Scalar(opt.gcv_min), best_score = std::numeric_limits<Scalar>::infinity();
        const int m = std::max(opt.gcv_points, 2);
        for (int j = 0; j < m; ++j) {
            const Scalar lambda = Scalar(std::exp(std::log(opt.gcv_min) +
                                                  (std::log(opt.gcv_max) - std::log(opt.gcv_min)) * j / (m - 1)));
            const Scalar score = gcv(curves, lambda);
            if (score < best_score) {
                best_score = score;
                best = lambda;
            }
        }
        return best;
    }

    Matrix smooth(const Matrix& curves, Scalar lambda) const { return curves * hat_matrix(lambda).transpose(); }

private:
    BSplineBasis<Scalar> basis_;
    Matrix design_;
    Matrix gram_;
    Matrix penalty_;
};

struct SmoothingResult {
    double penalty = 0;
};

/// Replace every curve by its penalised cubic B-spline fit evaluated on the grid.
template <typename Scalar>
FunctionalDataset<Scalar> smooth_dataset(const FunctionalDataset<Scalar>& raw, const SmoothingOptions& opt,
                                         SmoothingResult* info = nullptr) {
    raw.validate();
    if (opt.penalty && *opt.penalty < 0) throw InputError("smoothing penalty must be nonnegative");
    SplineSmoother<Scalar> smoother(raw.time_grid, opt.basis_size);
    const Scalar lambda = opt.penalty ? Scalar(*opt.penalty) : smoother.select_penalty(raw.values, opt);
    FunctionalDataset<Scalar> out = raw;
    out.values = smoother.smooth(raw.values, lambda);
    if (info) info->penalty = double(lambda);
    return out;
}

struct FpcaOptions {
    double var_threshold = 0.8;
    double min_component_share = 0.15;
};

namespace detail {

// Flip each column so that its largest-magnitude entry is positive; ties go to the lowest index.
template <typename Matrix>
void fix_signs(Matrix& columns) {
    for (Eigen::Index k = 0; k < columns.cols(); ++k) {
        Eigen::Index arg = 0;
        auto best = std::abs(columns(0, k));
        for (Eigen::Index t = 1; t < columns.rows(); ++t) {
            if (std::abs(columns(t, k)) > best) {
                best = std::abs(columns(t, k));
                arg = t;
            }
        }
        if (columns(arg, k) < 0) columns.col(k) = -columns.col(k);
    }
}

}  // namespace detail

/// Functional PCA of the pooled curves using quadrature-weighted SVD.
template <typename Scalar>
EigenBasis<Scalar> fit_fpca(const FunctionalDataset<Scalar>& data, const FpcaOptions& opt = {}) {
    using Matrix = typename EigenBasis<Scalar>::Matrix;
    using Vector = typename EigenBasis<Scalar>::Vector;
    data.validate();
    if (!(opt.var_threshold > 0 && opt.var_threshold <= 1)) throw InputError("var_threshold must lie in (0, 1]");
    if (!(opt.min_component_share >= 0 && opt.min_component_share < 1))
        throw InputError("min_component_share must lie in [0, 1)");
    const Eigen::Index N = data.values.rows();
    if (N < 2) throw DimensionError("fPCA needs at least two curves");

    EigenBasis<Scalar> out;
    out.time_grid = data.time_grid;
    out.subjects = data.subjects;
    out.channels = data.channels;
    out.mean_curve = data.values.colwise().mean().transpose();
    const Matrix centred = data.values.rowwise() - out.mean_curve.transpose();

    const Vector w = trapezoid_weights(data.time_grid);
    const Vector sqrt_w = w.array().sqrt();
    const Matrix scaled = (centred * sqrt_w.asDiagonal()) / std::sqrt(Scalar(N));
    const Scalar total = scaled.squaredNorm();
    if (!(total > Scalar(0))) throw DegenerateError("curves have zero variance; covariance is degenerate");

    Eigen::BDCSVD<Matrix> svd(scaled, Eigen::ComputeThinV);
    const Vector lambda = svd.singularValues().array().square();
    const Vector share = lambda / total;

    Eigen::Index K = 0;
    Scalar cumulative = 0;
    while (K < share.size()) {
        cumulative += share(K);
        ++K;
        if (cumulative >= Scalar(opt.var_threshold) * (1 - Scalar(1e-12))) break;
    }
    Eigen::Index kept = 0;
    while (kept < K && share(kept) >= Scalar(opt.min_component_share)) ++kept;
    K = std::max<Eigen::Index>(kept, 1);

    Matrix phi = sqrt_w.cwiseInverse().asDiagonal() * svd.matrixV().leftCols(K);
    detail::fix_signs(phi);
    out.eigenfunctions = phi;
    out.eigenvalues = lambda.head(K);
    out.var_explained = share.head(K);
    out.scores = centred * w.asDiagonal() * phi;
    return out;
}

/// Basis built from caller-supplied eigenfunctions (e.g. known generating curves).
///
/// The mean curve is the pooled sample mean and scores are quadrature projections.
/// Eigenvalues are the empirical score variances; var_explained divides them by the
/// total variance of the centred curves.
template <typename Scalar>
EigenBasis<Scalar> basis_from_eigenfunctions(const FunctionalDataset<Scalar>& data,
                                             const typename EigenBasis<Scalar>::Matrix& eigenfunctions) {
    using Matrix = typename EigenBasis<Scalar>::Matrix;
    using Vector = typename EigenBasis<Scalar>::Vector;
    data.validate();
    if (eigenfunctions.rows() != data.timepoints() || eigenfunctions.cols() < 1)
        throw DimensionError("eigenfunctions must be T x K with K >= 1");
    EigenBasis<Scalar> out;
    out.time_grid = data.time_grid;
    out.subjects = data.subjects;
    out.channels = data.channels;
    out.mean_curve = data.values.colwise().mean().transpose();
    const Matrix centred = data.values.rowwise() - out.mean_curve.transpose();
    const Vector w = trapezoid_weights(data.time_grid);
    out.eigenfunctions = eigenfunctions;
    out.scores = centred * w.asDiagonal() * eigenfunctions;
    const Scalar N = Scalar(centred.rows());
    const Scalar total = (centred * w.array().sqrt().matrix().asDiagonal()).squaredNorm() / N;
    if (!(total > Scalar(0))) throw DegenerateError("curves have zero variance; covariance is degenerate");
    out.eigenvalues = out.scores.colwise().squaredNorm().transpose() / N;
    out.var_explained = out.eigenvalues / total;
    return out;
}

/// mean_curve + sum_k scores[u][i][k] * phi_k.
template <typename Scalar>
typename EigenBasis<Scalar>::Vector reconstruct(const EigenBasis<Scalar>& basis, Eigen::Index u, Eigen::Index i) {
    if (u < 0 || u >= basis.subjects || i < 0 || i >= basis.channels)
        throw DimensionError("reconstruct: index out of range");
    const Eigen::Index r = u * basis.channels + i;
    return basis.mean_curve + basis.eigenfunctions * basis.scores.row(r).transpose();
}

}  // namespace mlpp
