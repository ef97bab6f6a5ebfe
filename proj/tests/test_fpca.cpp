#include <doctest.h>

#include <cmath>
#include <random>

#include "mlpp/fpca.hpp"
#include "mlpp/simgen.hpp"

using namespace mlpp;

namespace {

FunctionalDataset<double> dataset_from(const Eigen::MatrixXd& curves, const Eigen::VectorXd& grid, Eigen::Index U,
                                       Eigen::Index n) {
    FunctionalDataset<double> d;
    d.subjects = U;
    d.channels = n;
    d.values = curves;
    d.time_grid = grid;
    for (Eigen::Index u = 0; u < U; ++u) d.group_of.push_back(u < U / 2 ? kGroupA : kGroupB);
    return d;
}

// Two curves orthonormal under trapezoid weights on `grid`.
Eigen::MatrixXd orthonormal_pair(const Eigen::VectorXd& grid) {
    const Eigen::VectorXd w = trapezoid_weights(grid);
    Eigen::MatrixXd phi(grid.size(), 2);
    for (Eigen::Index t = 0; t < grid.size(); ++t) {
        phi(t, 0) = std::sin(3.141592653589793 * grid(t)) + 0.3;
        phi(t, 1) = std::cos(2 * 3.141592653589793 * grid(t));
    }
    phi.col(0) /= std::sqrt(inner_product(phi.col(0), phi.col(0), w));
    phi.col(1) -= inner_product(phi.col(1), phi.col(0), w) * phi.col(0);
    phi.col(1) /= std::sqrt(inner_product(phi.col(1), phi.col(1), w));
    return phi;
}

double max_error_up_to_sign(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("B-spline basis is a partition of unity") {
    BSplineBasis<double> basis(0.0, 2.0, 9);
    for (double x : {0.0, 0.13, 0.5, 1.0, 1.77, 2.0}) CHECK(basis.evaluate(x).sum() == doctest::Approx(1.0).epsilon(1e-12));
    // Derivatives of a partition of unity sum to zero.
    CHECK(std::abs(basis.evaluate(0.77, 1).sum()) < 1e-10);
    CHECK_THROWS_AS(BSplineBasis<double>(1.0, 1.0, 6), InputError);
    CHECK_THROWS_AS(BSplineBasis<double>(0.0, 1.0, 3), DimensionError);
}

TEST_CASE("roughness penalty annihilates linear functions") {
    BSplineBasis<double> basis(0.0, 1.0, 12);
    // Coefficients of x in a clamped cubic basis are the Greville abscissae.
    const Eigen::VectorXd& k = basis.knots();
    Eigen::VectorXd greville(basis.size());
    for (Eigen::Index j = 0; j < basis.size(); ++j) greville(j) = (k(j + 1) + k(j + 2) + k(j + 3)) / 3.0;
    const Eigen::MatrixXd P = basis.roughness_penalty();
    CHECK((P * greville).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((P * Eigen::VectorXd::Ones(basis.size())).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("unpenalised full-size smoother reproduces a cubic") {
    const Eigen::Index T = 30;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(T, 0.0, 3.0);
    Eigen::MatrixXd curve(1, T);
    for (Eigen::Index t = 0; t < T; ++t) curve(0, t) = 1 - 2 * grid(t) + 0.5 * std::pow(grid(t), 3);
    SplineSmoother<double> s(grid, T);
    CHECK((s.smooth(curve, 0.0) - curve).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("constant curves survive any penalty") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(40, -1.0, 1.0);
    const Eigen::MatrixXd curve = Eigen::MatrixXd::Constant(2, 40, 3.25);
    SplineSmoother<double> s(grid, 15);
    for (double lambda : {0.0, 1e-3, 10.0, 1e4}) CHECK((s.smooth(curve, lambda) - curve).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("GCV smoothing of a noisy sinusoid leaves residuals near the noise level") {
    const Eigen::Index T = 200, N = 20;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(T, 0.0, 1.0);
    std::mt19937_64 eng(42);
    std::normal_distribution<double> noise(0.0, 0.2);
    Eigen::MatrixXd curves(N, T);
    for (Eigen::Index r = 0; r < N; ++r)
        for (Eigen::Index t = 0; t < T; ++t) curves(r, t) = std::sin(2 * 3.141592653589793 * grid(t)) + noise(eng);
    FunctionalDataset<double> d = dataset_from(curves, grid, 4, 5);
    SmoothingOptions opt;
    opt.basis_size = 20;
    SmoothingResult info;
    const auto sm = smooth_dataset(d, opt, &info);
    const double resid_var = (sm.values - curves).squaredNorm() / static_cast<double>(N * T);
    CHECK(resid_var == doctest::Approx(0.04).epsilon(0.25));
    CHECK(info.penalty > 0);
}

TEST_CASE("smoother rejects bad inputs") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    CHECK_THROWS_AS(SplineSmoother<double>(grid, 11), DimensionError);
    FunctionalDataset<double> d = dataset_from(Eigen::MatrixXd::Ones(4, 10), grid, 2, 2);
    d.time_grid(3) = d.time_grid(2);
    CHECK_THROWS_AS(smooth_dataset(d, SmoothingOptions{}), InputError);
}

TEST_CASE("rank-1 noiseless data gives one component with all the variance") {
    const Eigen::Index T = 50, U = 4, n = 5;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(T, 0.0, 1.0);
    const Eigen::MatrixXd phi = orthonormal_pair(grid);
    std::mt19937_64 eng(7);
    std::normal_distribution<double> z;
    Eigen::VectorXd xi(U * n);
    for (auto& v : xi) v = z(eng);
    xi.array() -= xi.mean();
    const auto d = dataset_from(xi * phi.col(0).transpose(), grid, U, n);
    const auto basis = fit_fpca(d);
    REQUIRE(basis.components() == 1);
    CHECK(basis.var_explained(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(max_error_up_to_sign(basis.scores.col(0), xi) < 1e-8);
}

TEST_CASE("two components with score variances 4 and 1 match a direct SVD") {
    const Eigen::Index T = 60, U = 10, n = 20;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(T, 0.0, 2.0);
    const Eigen::MatrixXd phi = orthonormal_pair(grid);
    std::mt19937_64 eng(3);
    std::normal_distribution<double> z;
    Eigen::MatrixXd xi(U * n, 2);
    for (Eigen::Index r = 0; r < xi.rows(); ++r) {
        xi(r, 0) = 2 * z(eng);
        xi(r, 1) = z(eng);
    }
    const auto d = dataset_from(xi * phi.transpose(), grid, U, n);
    FpcaOptions opt;
    opt.var_threshold = 0.999;
    opt.min_component_share = 0.05;
    const auto basis = fit_fpca(d, opt);
    REQUIRE(basis.components() == 2);

    // Oracle: eigenvalues of the weighted covariance via a plain SVD of the centred matrix.
    const Eigen::VectorXd w = trapezoid_weights(grid);
    const Eigen::MatrixXd centred = d.values.rowwise() - d.values.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred * w.array().sqrt().matrix().asDiagonal() / std::sqrt(double(U * n)));
    const Eigen::VectorXd ev = svd.singularValues().array().square();
    CHECK(basis.eigenvalues(0) == doctest::Approx(ev(0)).epsilon(1e-10));
    CHECK(basis.eigenvalues(1) == doctest::Approx(ev(1)).epsilon(1e-10));
    CHECK(basis.var_explained(0) == doctest::Approx(0.8).epsilon(0.1));
    CHECK(basis.var_explained(1) == doctest::Approx(0.2).epsilon(0.25));
    CHECK(basis.var_explained.sum() <= 1.0 + 1e-12);
    CHECK(basis.eigenvalues(0) >= basis.eigenvalues(1));
    const Eigen::MatrixXd gram = basis.eigenfunctions.transpose() * w.asDiagonal() * basis.eigenfunctions;
    CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("exactly uncorrelated scores give the generating eigenfunctions up to sign") {
    const Eigen::Index T = 70, U = 6, n = 5;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(T, 0.0, 1.0);
    const Eigen::MatrixXd phi = orthonormal_pair(grid);
    // Centred orthogonal score columns with variances 4 and 1.
    Eigen::MatrixXd raw = Eigen::MatrixXd::Random(U * n, 2);
    raw.rowwise() -= raw.colwise().mean();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(U * n, 2);
    q *= std::sqrt(double(U * n));
    q.col(0) *= 2.0;
    FpcaOptions opt;
    opt.var_threshold = 0.99;
    const auto basis = fit_fpca(dataset_from(q * phi.transpose(), grid, U, n), opt);
    REQUIRE(basis.components() == 2);
    CHECK(basis.var_explained.sum() >= 1 - 1e-8);
    CHECK(max_error_up_to_sign(basis.eigenfunctions.col(0), phi.col(0)) < 1e-6);
    CHECK(max_error_up_to_sign(basis.eigenfunctions.col(1), phi.col(1)) < 1e-6);
}

TEST_CASE("zero-variance data is rejected") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(20, 0.0, 1.0);
    CHECK_THROWS_AS(fit_fpca(dataset_from(Eigen::MatrixXd::Constant(8, 20, 2.0), grid, 4, 2)), DegenerateError);
}

TEST_CASE("reconstruction identities") {
    const Eigen::Index T = 40, U = 4, n = 3;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(T, 0.0, 1.0);
    const Eigen::MatrixXd phi = orthonormal_pair(grid);
    Eigen::MatrixXd xi = Eigen::MatrixXd::Random(U * n, 2);
    Eigen::RowVectorXd mean(T);
    for (Eigen::Index t = 0; t < T; ++t) mean(t) = 1 + grid(t);
    const auto d = dataset_from((xi * phi.transpose()).rowwise() + mean, grid, U, n);
    FpcaOptions opt;
    opt.var_threshold = 1.0;
    opt.min_component_share = 0.0;
    auto basis = fit_fpca(d, opt);
    basis.eigenfunctions = basis.eigenfunctions.leftCols(2).eval();
    basis.scores = basis.scores.leftCols(2).eval();

    // Noiseless rank-2 round trip.
    for (Eigen::Index u = 0; u < U; ++u)
        for (Eigen::Index i = 0; i < n; ++i)
            CHECK((reconstruct(basis, u, i) - d.values.row(u * n + i).transpose()).cwiseAbs().maxCoeff() < 1e-6);

    // Zero scores give the mean; a unit score adds the eigenfunction.
    basis.scores.row(0).setZero();
    CHECK((reconstruct(basis, 0, 0) - basis.mean_curve).cwiseAbs().maxCoeff() < 1e-14);
    basis.scores.row(0) << 0, 1;
    CHECK((reconstruct(basis, 0, 0) - basis.mean_curve - basis.eigenfunctions.col(1)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS_AS(reconstruct(basis, U, 0), DimensionError);
}

TEST_CASE("fPCA on noiseless simulated data recovers the generating curves") {
    SimDesign design;
    design.subjects = 10;
    design.channels = 10;
    design.timepoints = 80;
    design.snr = std::numeric_limits<double>::infinity();
    // Distinct group offsets per dimension keep the two eigenvalues apart.
    design.score_means << 2.0, 0.5, -2.0, -0.5;
    const Simulation sim = simulate(design);
    FpcaOptions opt;
    opt.var_threshold = 1.0;
    opt.min_component_share = 0.0;
    const auto basis = fit_fpca(sim.data, opt);
    REQUIRE(basis.components() >= 2);
    CHECK(basis.var_explained.head(2).sum() >= 1 - 1e-8);
    // Pooled fPCA recovers the span; the oracle compares projections onto it.
    const Eigen::VectorXd w = trapezoid_weights(sim.data.time_grid);
    const Eigen::MatrixXd est = basis.eigenfunctions.leftCols(2);
    for (Eigen::Index k = 0; k < 2; ++k) {
        const Eigen::VectorXd phi = sim.truth.eigenfunctions.col(k);
        const Eigen::VectorXd proj = est * (est.transpose() * w.asDiagonal() * phi);
        CHECK((proj - phi).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("simulated data at SNR 6 with var_threshold 0.9 retains two components" * doctest::may_fail()) {
    SimDesign design;
    design.seed = 11;
    const Simulation sim = simulate(design);
    SmoothingOptions sopt;
    const auto smoothed = smooth_dataset(sim.data, sopt);
    FpcaOptions opt;
    opt.var_threshold = 0.9;
    CHECK(fit_fpca(smoothed, opt).components() == 2);
}
