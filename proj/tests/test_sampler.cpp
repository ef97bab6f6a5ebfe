#include <doctest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <numeric>

#include "mlpp/archive.hpp"
#include "mlpp/diagnostics.hpp"
#include "mlpp/random.hpp"
#include "mlpp/sampler.hpp"
#include "support.hpp"

using namespace mlpp;

namespace {

// Single curve, K = 1, eigenfunction with unit unweighted norm.
ModelData unit_curve(Eigen::Index T = 6) {
    ModelData d = test::toy_model_data({kGroupA, kGroupB}, 1, T, 1);
    d.eigenfunctions.col(0).normalize();
    d.refresh();
    return d;
}

ModelState random_state(const HyperParams& hp, const std::vector<int>& groups, Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    return draw_state_from_prior(hp, static_cast<Eigen::Index>(groups.size()), n, groups, rng);
}

// Mean of a truncated Gamma(shape, rate) on (lower, inf) by quadrature of the unnormalised density.
std::pair<double, double> truncated_gamma_moments(double shape, double rate, double lower) {
    boost::math::quadrature::exp_sinh<double> integrator;
    auto density = [&](double x) { return std::pow(x, shape - 1) * std::exp(-rate * x); };
    auto shifted = [&](auto f) { return [=](double y) { return f(lower + y); }; };
    const double z = integrator.integrate(shifted(density));
    const double m1 = integrator.integrate(shifted([&](double x) { return x * density(x); }));
    const double m2 = integrator.integrate(shifted([&](double x) { return x * x * density(x); }));
    return {m1 / z, m2 / z};
}

}  // namespace

TEST_CASE("score conditional limits and arithmetic") {
    ModelData d = unit_curve();
    d.centred.row(0) = 2.0 * d.eigenfunctions.col(0).transpose();
    d.refresh();
    const std::vector<int> groups{kGroupA, kGroupB};
    ModelState s = random_state(test::toy_hyperparams(1), groups, 1, 1);
    s.g.setConstant(1);
    s.mu_common(0) = 0;
    s.s_common(0) = 1;
    s.tau = 1;
    NormalParams p = xi_conditional(s, d, 0, 0, 0);
    CHECK(p.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.variance == doctest::Approx(0.5).epsilon(1e-14));

    s.mu_common(0) = 0.7;
    s.s_common(0) = 3;
    s.tau = 1e-13;
    p = xi_conditional(s, d, 0, 0, 0);
    CHECK(p.mean == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(p.variance == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    s.tau = 2.5;
    s.s_common(0) = 1e-13;
    p = xi_conditional(s, d, 0, 0, 0);
    CHECK(p.mean == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(p.variance == doctest::Approx(1.0 / 2.5).epsilon(1e-9));
}

TEST_CASE("noise precision conditional") {
    HyperParams hp = test::toy_hyperparams(1);
    hp.tau_shape = hp.tau_rate = 0.01;
    const GammaParams g = tau_conditional(hp, 0.0, 2);
    CHECK(g.shape == doctest::Approx(1.01));
    CHECK(g.rate == doctest::Approx(0.01));
    CHECK(g.shape / g.rate == doctest::Approx(101.0));
}

TEST_CASE("allocation weights") {
    const std::vector<int> groups{kGroupA, kGroupB};
    ModelState s = random_state(test::toy_hyperparams(1, 1), groups, 3, 2);
    Rng rng(5);

    s.omega.row(0) << 1.0, 0.0, 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        update_g(s, groups, rng);
        CHECK((s.g.array() == 1).all());
    }

    // Identical clusters everywhere and one subject label: g is uniform.
    s.omega.row(0).setConstant(1.0 / 3.0);
    s.mu_common(0) = 0.3;
    s.mu_group.setConstant(0.3);
    s.mu_subject[0].setConstant(0.3);
    s.s_common(0) = 2;
    s.s_group.setConstant(2);
    s.s_subject[0].setConstant(2);
    const auto w = g_log_weights(s, groups, 1, 0);
    CHECK(w[0] == doctest::Approx(w[1]).epsilon(1e-14));
    CHECK(w[0] == doctest::Approx(w[2]).epsilon(1e-14));
    std::array<int, 3> counts{};
    for (int rep = 0; rep < 30000; ++rep) {
        update_g(s, groups, rng);
        counts[static_cast<std::size_t>(s.g(0, 0) - 1)] += 1;
    }
    for (int c : counts) CHECK(c / 30000.0 == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("collapsed allocation weights match enumeration over recording labels") {
    const std::vector<int> groups{kGroupB, kGroupA};
    const ModelState s = random_state(test::toy_hyperparams(1, 2), groups, 2, 9);
    for (Eigen::Index u = 0; u < 2; ++u) {
        const Eigen::Index c = group_column(groups[static_cast<std::size_t>(u)]);
        auto dens = [&](double x, double m, double prec) {
            return std::sqrt(prec / (2 * 3.141592653589793)) * std::exp(-0.5 * prec * (x - m) * (x - m));
        };
        std::array<double, 3> joint{};
        // Sum over every eta vector of the two channels.
        for (int e0 = 0; e0 < 2; ++e0)
            for (int e1 = 0; e1 < 2; ++e1) {
                const int e[2] = {e0, e1};
                double pc = s.omega(0, 0), pg = s.omega(0, 1), ps = s.omega(0, 2);
                for (int i = 0; i < 2; ++i) {
                    const double x = s.xi(u * 2 + i, 0);
                    const double pe = s.p[0](c, e[i]);
                    pc *= pe * dens(x, s.mu_common(0), s.s_common(0));
                    pg *= pe * dens(x, s.mu_group(0, c), s.s_group(0, c));
                    ps *= pe * dens(x, s.mu_subject[0](u, e[i]), s.s_subject[0](u, e[i]));
                }
                joint[0] += pc;
                joint[1] += pg;
                joint[2] += ps;
            }
        const double total = joint[0] + joint[1] + joint[2];
        const auto lw = g_log_weights(s, groups, u, 0);
        const double norm = log_sum_exp(lw);
        for (int g = 0; g < 3; ++g)
            CHECK(std::abs(std::exp(lw[static_cast<std::size_t>(g)] - norm) - joint[static_cast<std::size_t>(g)] / total) <
                  1e-12);
    }
}

TEST_CASE("cluster draws without members come from the prior") {
    Rng rng(21);
    std::vector<double> mu, sd;
    for (int rep = 0; rep < 20000; ++rep) {
        const ClusterParams c = draw_cluster(rng, 0, 0, 0, 1.5, 4.0, 3.0, 1.0);
        mu.push_back(c.mean);
        sd.push_back(1 / std::sqrt(c.precision));
    }
    boost::math::normal_distribution<double> prior(1.5, 0.5);
    CHECK(test::ks_pvalue(mu, [&](double x) { return boost::math::cdf(prior, x); }) > 0.01);
    CHECK(test::ks_pvalue(sd, [](double x) { return std::clamp(x / 3.0, 0.0, 1.0); }) > 0.01);

    // Infinite prior precision pins the mean.
    for (int rep = 0; rep < 10; ++rep) CHECK(draw_cluster(rng, 5, 10.0, 30.0, -0.25, 1e300, 3.0, 1.0).mean == -0.25);
}

TEST_CASE("truncated gamma moments against quadrature") {
    Rng rng(33);
    const int N = 100000;
    auto sample_mean = [&](double shape, double rate, double lower) {
        double s = 0, s2 = 0;
        for (int i = 0; i < N; ++i) {
            const double x = draw_truncated_gamma(rng, shape, rate, lower);
            CHECK_FALSE(x < lower);
            s += x;
            s2 += x * x;
        }
        return std::pair{s / N, s2 / N};
    };
    CHECK(sample_mean(2.0, 1.0, 0.0).first == doctest::Approx(2.0).epsilon(0.02));

    const double median = boost::math::quantile(boost::math::gamma_distribution<double>(2.0, 1.0), 0.5);
    struct Case {
        double shape, rate, lower;
    };
    for (Case c : {Case{2.0, 1.0, median}, Case{0.5, 2.0, 0.1}, Case{3.0, 0.5, 40.0}, Case{0.0, 1.5, 0.2}}) {
        CAPTURE(c.shape);
        CAPTURE(c.lower);
        const auto [m1, m2] = sample_mean(c.shape, c.rate, c.lower);
        const auto [q1, q2] = truncated_gamma_moments(c.shape, c.rate, c.lower);
        CHECK(m1 == doctest::Approx(q1).epsilon(0.01));
        CHECK(m2 == doctest::Approx(q2).epsilon(0.01));
    }
}

TEST_CASE("subject-level weight conditional") {
    HyperParams hp = test::toy_hyperparams(1);
    const std::vector<int> groups(20, kGroupA);
    ModelState s = ModelState::zeros(20, 1, 1, 3);
    for (Eigen::Index u = 0; u < 20; ++u) s.g(u, 0) = u < 10 ? 1 : (u < 16 ? 2 : 3);
    const Eigen::Vector3d conc = omega_conditional(s, hp, 0);
    CHECK(conc.isApprox(Eigen::Vector3d(10.45, 6.45, 4.10), 1e-14));
    CHECK(conc(0) / conc.sum() == doctest::Approx(0.4976).epsilon(1e-3));

    ModelState none = ModelState::zeros(0, 1, 1, 3);
    CHECK(omega_conditional(none, hp, 0).isApprox(hp.delta));

    // Everyone common: the posterior mean of omega_1 tends to one as U grows.
    double prev = 0;
    for (Eigen::Index U : {10, 100, 1000}) {
        ModelState all = ModelState::zeros(U, 1, 1, 3);
        all.g.setConstant(1);
        const Eigen::Vector3d c = omega_conditional(all, hp, 0);
        const double mean = c(0) / c.sum();
        CHECK(mean > prev);
        prev = mean;
    }
    CHECK(prev > 0.999);
}

TEST_CASE("stick conditionals") {
    HyperParams hp = test::toy_hyperparams(1, 3);
    hp.alpha(0) = 1.0;
    const std::vector<int> groups{kGroupA, kGroupB};
    ModelState s = ModelState::zeros(2, 5, 1, 3);
    s.g.setConstant(1);
    s.eta.setConstant(4);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const BetaParams b = stick_conditional(s, groups, hp, 0, kGroupA, j);
        CHECK(b.a == 1.0);
        CHECK(b.b == 1.0);
    }
    s.g(0, 0) = 3;
    const BetaParams b = stick_conditional(s, groups, hp, 0, kGroupA, 0);
    CHECK(b.a == 6.0);
    CHECK(b.b == 1.0);
    CHECK(b.a / (b.a + b.b) == doctest::Approx(6.0 / 7.0));
    // Group B has no subject-specific subject.
    CHECK(stick_conditional(s, groups, hp, 0, kGroupB, 0).a == 1.0);
}

TEST_CASE("conditional parameters match independent closed forms on random states") {
    const std::vector<int> groups{kGroupA, kGroupB, kGroupA, kGroupB, kGroupB};
    const Eigen::Index n = 4, T = 9, K = 2;
    HyperParams hp = test::toy_hyperparams(K, 4);
    hp.alpha << 0.7, 1.9;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        Rng rng(seed + 100);
        ModelData d = test::toy_model_data(groups, n, T, K);
        d.centred = Eigen::MatrixXd::NullaryExpr(d.centred.rows(), T, [&] { return rng.normal(0, 1.5); });
        d.refresh();
        ModelState s = random_state(hp, groups, n, seed);
        s.tau = rng.gamma(2, 1);

        // Scores: raw residual loops.
        for (Eigen::Index u = 0; u < 5; ++u)
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index k = 0; k < K; ++k) {
                    const Eigen::Index r = u * n + i;
                    double cross = 0, norm = 0;
                    for (Eigen::Index t = 0; t < T; ++t) {
                        double resid = d.centred(r, t);
                        for (Eigen::Index l = 0; l < K; ++l)
                            if (l != k) resid -= s.xi(r, l) * d.eigenfunctions(t, l);
                        cross += resid * d.eigenfunctions(t, k);
                        norm += d.eigenfunctions(t, k) * d.eigenfunctions(t, k);
                    }
                    const ClusterParams c = cluster_of(s, groups, u, i, k);
                    const double prec = s.tau * norm + c.precision;
                    const NormalParams p = xi_conditional(s, d, u, i, k);
                    CHECK(std::abs(p.variance - 1 / prec) <= 1e-10 * (1 / prec));
                    const double mean = (s.tau * cross + c.precision * c.mean) / prec;
                    CHECK(std::abs(p.mean - mean) <= 1e-10 * std::max(1.0, std::abs(mean)));
                }

        // Noise precision: explicit residual sum.
        double ssr = 0;
        for (Eigen::Index r = 0; r < d.centred.rows(); ++r)
            for (Eigen::Index t = 0; t < T; ++t) {
                double fit = 0;
                for (Eigen::Index k = 0; k < K; ++k) fit += s.xi(r, k) * d.eigenfunctions(t, k);
                ssr += (d.centred(r, t) - fit) * (d.centred(r, t) - fit);
            }
        CHECK(std::abs(residual_sum_squares(s, d) - ssr) <= 1e-10 * ssr);
        const GammaParams gp = tau_conditional(hp, residual_sum_squares(s, d), d.centred.size());
        CHECK(gp.shape == doctest::Approx(hp.tau_shape + 0.5 * 5 * n * T).epsilon(1e-15));
        CHECK(std::abs(gp.rate - (hp.tau_rate + 0.5 * ssr)) <= 1e-10 * gp.rate);

        // Subject-level weights: counts of g per level.
        const Eigen::MatrixXi z = derive_z(s.g, s.eta, groups, hp.subject_labels);
        for (Eigen::Index k = 0; k < K; ++k) {
            const Eigen::Vector3d conc = omega_conditional(s, hp, k);
            for (int level = 1; level <= 3; ++level) {
                const auto count = (s.g.col(k).array() == level).count();
                CHECK(std::abs(conc(level - 1) - (hp.delta(level - 1) + static_cast<double>(count))) < 1e-10);
            }
            // Sticks: subject-specific z labels within each group.
            for (int code : {kGroupA, kGroupB}) {
                std::vector<int> labels;
                for (Eigen::Index u = 0; u < 5; ++u)
                    for (Eigen::Index i = 0; i < n; ++i)
                        if (groups[static_cast<std::size_t>(u)] == code && z(u * n + i, k) >= 4)
                            labels.push_back(z(u * n + i, k));
                for (Eigen::Index j = 0; j < hp.subject_labels; ++j) {
                    const auto at = std::count(labels.begin(), labels.end(), 4 + j);
                    const auto above = std::count_if(labels.begin(), labels.end(), [&](int l) { return l > 4 + j; });
                    const BetaParams b = stick_conditional(s, groups, hp, k, code, j);
                    CHECK(std::abs(b.a - (1.0 + static_cast<double>(at))) < 1e-10);
                    CHECK(std::abs(b.b - (hp.alpha(k) + static_cast<double>(above))) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("short chains have the requested length and repeat exactly") {
    const std::vector<int> groups{kGroupA, kGroupA, kGroupB, kGroupB};
    ModelData d = test::toy_model_data(groups, 3, 12, 2);
    Rng rng(3);
    d.centred = Eigen::MatrixXd::NullaryExpr(12, 12, [&] { return rng.normal(0, 1); });
    d.refresh();
    SamplerConfig cfg;
    cfg.n_iter = 10;
    cfg.burn_in = 0;
    cfg.n_chains = 2;
    cfg.seed = 77;
    cfg.audit_every = 1;
    const HyperParams hp = test::toy_hyperparams(2);
    const auto a = run_chains(d, hp, cfg);
    const auto b = run_chains(d, hp, cfg);
    REQUIRE(a.size() == 2);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(a[c].draws() == 10);
        CHECK(a[c].scalars == b[c].scalars);
        CHECK(a[c].g == b[c].g);
        CHECK(a[c].eta == b[c].eta);
    }
    CHECK(a[0].scalars != a[1].scalars);

    cfg.n_iter = 25;
    cfg.burn_in = 5;
    cfg.thin = 3;
    CHECK(run_chain(d, hp, cfg, 0).draws() == 6);
    cfg.burn_in = 25;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("checkpointed chains resume to the same draws") {
    const std::vector<int> groups{kGroupA, kGroupB, kGroupB};
    ModelData d = test::toy_model_data(groups, 2, 10, 1);
    Rng rng(8);
    d.centred = Eigen::MatrixXd::NullaryExpr(6, 10, [&] { return rng.normal(0, 1); });
    d.refresh();
    const HyperParams hp = test::toy_hyperparams(1);
    SamplerConfig cfg;
    cfg.n_iter = 40;
    cfg.burn_in = 10;
    cfg.seed = 4;
    const ChainArchive full = run_chain(d, hp, cfg, 0);

    const auto dir = test::scratch_dir("resume");
    ChainOptions opt;
    opt.checkpoint_dir = dir;
    cfg.checkpoint_every = 7;
    SamplerConfig partial = cfg;
    partial.n_iter = 26;  // stop after the checkpoint at iteration 21
    run_chain(d, hp, partial, 0, opt);
    REQUIRE(has_checkpoint(dir));
    opt.resume = true;
    const ChainArchive resumed = run_chain(d, hp, cfg, 0, opt);
    CHECK(resumed.iterations == full.iterations);
    CHECK(resumed.scalars == full.scalars);
    CHECK(resumed.g == full.g);
}

TEST_CASE("posterior of the noise precision concentrates on the truth") {
    const std::vector<int> groups{kGroupA, kGroupA, kGroupB, kGroupB};
    const Eigen::Index n = 10, T = 60;
    HyperParams hp = test::toy_hyperparams(2);
    hp.tau_shape = hp.tau_rate = 0.01;
    ModelData d = test::toy_model_data(groups, n, T, 2);
    Rng rng(15);
    ModelState truth = draw_state_from_prior(test::toy_hyperparams(2), 4, n, groups, rng);
    truth.tau = 4.0;
    d.centred = draw_data_from_state(truth, d.eigenfunctions, rng);
    d.refresh();
    SamplerConfig cfg;
    cfg.n_iter = 3000;
    cfg.burn_in = 500;
    cfg.n_chains = 1;
    cfg.seed = 6;
    const ChainArchive a = run_chain(d, hp, cfg, 0);
    const double mean = a.scalars.col(a.scalar_index("tau")).mean();
    CHECK(mean == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("prior recovery with the likelihood disabled") {
    const std::vector<int> groups{kGroupA, kGroupA, kGroupB, kGroupB};
    HyperParams hp = test::toy_hyperparams(1, 3);
    hp.h_common_inv(0) = 2.0;
    hp.alpha(0) = 1.5;
    ModelData d = test::toy_model_data(groups, 2, 10, 1);
    Rng rng(2024);
    ModelState s = draw_state_from_prior(hp, 4, 2, groups, rng);
    UpdateOptions opt;
    opt.use_likelihood = false;
    double ssr = residual_sum_squares(s, d);
    std::vector<double> mu, omega1, stick1, tau;
    const int draws = 10000, thin = 50;
    for (int it = 0; it < draws * thin; ++it) {
        gibbs_sweep(s, d, hp, rng, opt, ssr);
        if ((it + 1) % thin) continue;
        mu.push_back(s.mu_common(0));
        omega1.push_back(s.omega(0, 0));
        stick1.push_back(s.p_star[0](0, 0));
        tau.push_back(s.tau);
    }
    boost::math::normal_distribution<double> mu_prior(0.0, std::sqrt(2.0));
    boost::math::beta_distribution<double> omega_prior(0.45, 0.55);
    boost::math::beta_distribution<double> stick_prior(1.0, 1.5);
    boost::math::gamma_distribution<double> tau_prior(3.0, 1.0 / 3.0);
    CHECK(test::ks_pvalue(mu, [&](double x) { return boost::math::cdf(mu_prior, x); }) > 0.01);
    CHECK(test::ks_pvalue(omega1, [&](double x) { return boost::math::cdf(omega_prior, std::clamp(x, 0.0, 1.0)); }) > 0.01);
    CHECK(test::ks_pvalue(stick1, [&](double x) { return boost::math::cdf(stick_prior, std::clamp(x, 0.0, 1.0)); }) > 0.01);
    CHECK(test::ks_pvalue(tau, [&](double x) { return boost::math::cdf(tau_prior, std::max(x, 0.0)); }) > 0.01);
}
