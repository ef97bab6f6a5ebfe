#include <doctest.h>

#include "mlpp/simgen.hpp"

using namespace mlpp;

TEST_CASE("generating eigenfunctions are orthonormal and fixed") {
    for (Eigen::Index T : {16, 100, 150}) {
        const Eigen::MatrixXd phi = make_eigenfunctions(T);
        const Eigen::VectorXd w = trapezoid_weights(simulation_grid(T));
        CHECK(std::abs(inner_product(phi.col(0), phi.col(1), w)) < 1e-10);
        CHECK(std::abs(inner_product(phi.col(0), phi.col(0), w) - 1) < 1e-10);
        CHECK(std::abs(inner_product(phi.col(1), phi.col(1), w) - 1) < 1e-10);
        CHECK(make_eigenfunctions(T) == phi);
    }
    CHECK_THROWS_AS(make_eigenfunctions(15), DimensionError);
}

TEST_CASE("default design has the full-scale shape and planted structure") {
    SimDesign design;
    const Simulation sim = simulate(design);
    CHECK(sim.data.subjects == 40);
    CHECK(sim.data.channels == 50);
    CHECK(sim.data.timepoints() == 150);
    CHECK(sim.data.values.rows() == 2000);
    CHECK(sim.data.group_a_count() == 20);

    // Dimension 1: two group clusters. Dimension 2: two group clusters and four singletons.
    CHECK(cluster_count(sim.truth.subject_level[0]) == 2);
    CHECK(cluster_count(sim.truth.subject_level[1]) == 6);
    REQUIRE(sim.truth.recording_level.size() == 4);
    const std::vector<Eigen::Index> expected{0, 1, 38, 39};
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(sim.truth.recording_level[r].subject == expected[r]);
        CHECK(sim.truth.recording_level[r].component == 1);
        CHECK(cluster_count(sim.truth.recording_level[r].labels) == 2);
    }
    // Group means at least four within-cluster sds apart.
    CHECK((design.score_means.row(0) - design.score_means.row(1)).cwiseAbs().minCoeff() >= 4 * design.score_sd);
}

TEST_CASE("empirical signal-to-noise ratio") {
    for (double snr : {6.0, 2.0}) {
        SimDesign design;
        design.snr = snr;
        design.seed = 5;
        const Simulation sim = simulate(design);
        const Eigen::MatrixXd noise = sim.data.values - sim.truth.noiseless;
        const auto var = [](const Eigen::MatrixXd& m) { return (m.array() - m.mean()).square().mean(); };
        CHECK(var(sim.truth.noiseless) / var(noise) == doctest::Approx(snr).epsilon(0.03));
    }
}

TEST_CASE("noiseless limit and determinism") {
    SimDesign design;
    design.subjects = 8;
    design.channels = 4;
    design.timepoints = 30;
    design.snr = std::numeric_limits<double>::infinity();
    const Simulation clean = simulate(design);
    CHECK(clean.data.values == clean.truth.noiseless);
    CHECK(clean.truth.noise_variance == 0);

    design.snr = 6;
    const Simulation a = simulate(design), b = simulate(design);
    CHECK(a.data.values == b.data.values);
    CHECK(a.truth.subject_level == b.truth.subject_level);
    design.seed = 2;
    CHECK(simulate(design).data.values != a.data.values);
}

TEST_CASE("invalid designs") {
    SimDesign d;
    d.snr = 0;
    CHECK_THROWS_AS(simulate(d), InputError);
    d = SimDesign{};
    d.subjects = 5;
    d.group_a = 4;
    CHECK_THROWS_AS(simulate(d), InputError);
    d = SimDesign{};
    d.outliers = {40};
    CHECK_THROWS_AS(simulate(d), InputError);
}
