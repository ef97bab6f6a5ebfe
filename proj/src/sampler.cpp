#include "mlpp/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "mlpp/error.hpp"

namespace mlpp {

namespace {

constexpr double kTinyPrecision = std::numeric_limits<double>::min();

double clamp_open_unit(double v) {
    if (v <= 0) return std::numeric_limits<double>::denorm_min();
    if (v >= 1) return std::nextafter(1.0, 0.0);
    return v;
}

void check_finite(double v, long iteration, const char* block) {
    if (!std::isfinite(v))
        throw NumericalError("non-finite value in block '" + std::string(block) + "' at iteration " +
                             std::to_string(iteration));
}

}  // namespace

void SamplerConfig::validate() const {
    if (n_iter < 1) throw InputError("n_iter must be positive");
    if (burn_in < 0 || burn_in >= n_iter) throw InputError("burn_in must lie in [0, n_iter)");
    if (thin < 1) throw InputError("thin must be positive");
    if (n_chains < 1) throw InputError("n_chains must be positive");
    if (draws_per_chain() < 1) throw InputError("(n_iter - burn_in) / thin must be at least 1");
    if (audit_every < 0 || checkpoint_every < 0) throw InputError("audit/checkpoint intervals must be nonnegative");
}

NormalParams xi_conditional(const ModelState& state, const ModelData& data, Eigen::Index u, Eigen::Index i,
                            Eigen::Index k, bool use_likelihood) {
    const ClusterParams c = cluster_of(state, data.group_of, u, i, k);
    if (!use_likelihood) return {c.mean, 1.0 / c.precision};
    const Eigen::Index r = data.row(u, i);
    // <residual excluding k, phi_k> through the cached projections and Gram matrix.
    double cross = data.projections(r, k);
    for (Eigen::Index l = 0; l < data.components(); ++l)
        if (l != k) cross -= state.xi(r, l) * data.gram(l, k);
    const double v = 1.0 / (state.tau * data.gram(k, k) + c.precision);
    return {v * (state.tau * cross + c.precision * c.mean), v};
}

GammaParams tau_conditional(const HyperParams& hp, double ssr, Eigen::Index observations) {
    return {hp.tau_shape + 0.5 * static_cast<double>(observations), hp.tau_rate + 0.5 * ssr};
}

Eigen::Vector3d omega_conditional(const ModelState& state, const HyperParams& hp, Eigen::Index k) {
    Eigen::Vector3d conc = hp.delta;
    for (Eigen::Index u = 0; u < state.subjects(); ++u) conc(state.g(u, k) - 1) += 1.0;
    return conc;
}

BetaParams stick_conditional(const ModelState& state, std::span<const int> group_of, const HyperParams& hp,
                             Eigen::Index k, int group_code, Eigen::Index j) {
    const int J = state.subject_labels();
    const Eigen::Index n = state.channels();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(J);
    for (Eigen::Index u = 0; u < state.subjects(); ++u) {
        if (state.g(u, k) != 3 || group_of[static_cast<std::size_t>(u)] != group_code) continue;
        for (Eigen::Index i = 0; i < n; ++i) counts(state.eta(u * n + i, k) - kFirstSubjectLabel) += 1.0;
    }
    return {1.0 + counts(j), hp.alpha(k) + counts.tail(J - j - 1).sum()};
}

NormalParams cluster_mean_conditional(double prior_mean, double prior_precision, double precision, Eigen::Index members,
                                      double sum) {
    const double post_precision = prior_precision + static_cast<double>(members) * precision;
    return {(prior_precision * prior_mean + precision * sum) / post_precision, 1.0 / post_precision};
}

std::array<double, 3> g_log_weights(const ModelState& state, std::span<const int> group_of, Eigen::Index u,
                                    Eigen::Index k, bool collapsed) {
    const Eigen::Index n = state.channels();
    const int D = group_of[static_cast<std::size_t>(u)];
    const Eigen::Index c = group_column(D);
    const auto kk = static_cast<std::size_t>(k);
    const int J = state.subject_labels();
    std::array<double, 3> w{std::log(state.omega(k, 0)), std::log(state.omega(k, 1)), std::log(state.omega(k, 2))};

    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = state.xi(u * n + i, k);
        w[0] += log_normal_precision(x, state.mu_common(k), state.s_common(k));
        w[1] += log_normal_precision(x, state.mu_group(k, c), state.s_group(k, c));
    }
    if (!std::isfinite(w[2]) && w[2] < 0) return w;
    if (collapsed) {
        std::vector<double> terms(static_cast<std::size_t>(J));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = state.xi(u * n + i, k);
            for (int j = 0; j < J; ++j)
                terms[static_cast<std::size_t>(j)] =
                    std::log(state.p[kk](c, j)) +
                    log_normal_precision(x, state.mu_subject[kk](u, j), state.s_subject[kk](u, j));
            w[2] += log_sum_exp(terms);
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index j = state.eta(u * n + i, k) - kFirstSubjectLabel;
            w[2] += log_normal_precision(state.xi(u * n + i, k), state.mu_subject[kk](u, j), state.s_subject[kk](u, j));
        }
    }
    return w;
}

void update_xi(ModelState& state, const ModelData& data, Rng& rng, const UpdateOptions& opt, double* ssr) {
    const Eigen::Index U = state.subjects(), n = state.channels(), K = state.components();
    for (Eigen::Index u = 0; u < U; ++u)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < K; ++k) {
                const NormalParams post = xi_conditional(state, data, u, i, k, opt.use_likelihood);
                const Eigen::Index r = u * n + i;
                const double old = state.xi(r, k);
                const double fresh = rng.normal(post.mean, std::sqrt(post.variance));
                if (ssr && opt.use_likelihood) {
                    // SSR change from moving xi by delta along phi_k.
                    double full = data.projections(r, k);
                    for (Eigen::Index l = 0; l < K; ++l) full -= state.xi(r, l) * data.gram(l, k);
                    const double delta = fresh - old;
                    *ssr += -2.0 * delta * full + delta * delta * data.gram(k, k);
                }
                state.xi(r, k) = fresh;
            }
}

void update_tau(ModelState& state, const ModelData& data, const HyperParams& hp, Rng& rng, const UpdateOptions& opt,
                std::optional<double> ssr) {
    if (!opt.use_likelihood) {
        state.tau = std::max(rng.gamma(hp.tau_shape, hp.tau_rate), kTinyPrecision);
        return;
    }
    const double resid = ssr ? std::max(*ssr, 0.0) : residual_sum_squares(state, data);
    if (!std::isfinite(resid)) throw NumericalError("residual sum of squares is not finite");
    const GammaParams post = tau_conditional(hp, resid, data.centred.size());
    state.tau = std::max(rng.gamma(post.shape, post.rate), kTinyPrecision);
}

ClusterParams draw_cluster(Rng& rng, Eigen::Index members, double sum, double sum_sq, double prior_mean,
                           double prior_precision, double gamma_bound, double current_precision) {
    auto prior_precision_draw = [&] {
        const double sd = gamma_bound * rng.uniform_open();
        return std::max(1.0 / (sd * sd), kTinyPrecision);
    };
    if (members == 0) {
        const double mu = rng.normal(prior_mean, 1.0 / std::sqrt(prior_precision));
        return {mu, prior_precision_draw()};
    }
    const NormalParams mpost = cluster_mean_conditional(prior_mean, prior_precision, current_precision, members, sum);
    const double mu = rng.normal(mpost.mean, std::sqrt(mpost.variance));
    const double m = static_cast<double>(members);
    const double ss = std::max(sum_sq - 2.0 * mu * sum + m * mu * mu, 0.0);
    if (!(ss > 0)) return {mu, prior_precision_draw()};
    const double lower = 1.0 / (gamma_bound * gamma_bound);
    const double s = draw_truncated_gamma(rng, 0.5 * (m - 1.0), 0.5 * ss, lower);
    return {mu, s};
}

void update_cluster_params(ModelState& state, std::span<const int> group_of, const HyperParams& hp, Rng& rng) {
    const Eigen::Index U = state.subjects(), n = state.channels(), K = state.components();
    const int J = state.subject_labels();
    struct Stats {
        Eigen::Index m = 0;
        double sum = 0, sum_sq = 0;
        void add(double x) {
            ++m;
            sum += x;
            sum_sq += x * x;
        }
    };
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        Stats common, group[2];
        std::vector<Stats> subject(static_cast<std::size_t>(U * J));
        for (Eigen::Index u = 0; u < U; ++u) {
            const int level = state.g(u, k);
            const Eigen::Index c = group_column(group_of[static_cast<std::size_t>(u)]);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double x = state.xi(u * n + i, k);
                if (level == 1) common.add(x);
                else if (level == 2) group[c].add(x);
                else subject[static_cast<std::size_t>(u * J + state.eta(u * n + i, k) - kFirstSubjectLabel)].add(x);
            }
        }
        ClusterParams cp = draw_cluster(rng, common.m, common.sum, common.sum_sq, 0.0, 1.0 / hp.h_common_inv(k),
                                        hp.gamma_common(k), state.s_common(k));
        state.mu_common(k) = cp.mean;
        state.s_common(k) = cp.precision;
        for (Eigen::Index c = 0; c < 2; ++c) {
            cp = draw_cluster(rng, group[c].m, group[c].sum, group[c].sum_sq, hp.phi_group(k, c),
                              1.0 / hp.h_group_inv(k, c), hp.gamma_group(k, c), state.s_group(k, c));
            state.mu_group(k, c) = cp.mean;
            state.s_group(k, c) = cp.precision;
        }
        for (Eigen::Index u = 0; u < U; ++u) {
            const Eigen::Index c = group_column(group_of[static_cast<std::size_t>(u)]);
            for (int j = 0; j < J; ++j) {
                const Stats& st = subject[static_cast<std::size_t>(u * J + j)];
                cp = draw_cluster(rng, st.m, st.sum, st.sum_sq, hp.phi_subject(k, c), 1.0 / hp.h_subject_inv(k, c),
                                  hp.gamma_subject(k, c), state.s_subject[kk](u, j));
                state.mu_subject[kk](u, j) = cp.mean;
                state.s_subject[kk](u, j) = cp.precision;
            }
        }
    }
}

namespace {

void draw_eta_row(ModelState& state, std::span<const int> group_of, Eigen::Index u, Eigen::Index k, Rng& rng) {
    const Eigen::Index n = state.channels();
    const int J = state.subject_labels();
    const auto kk = static_cast<std::size_t>(k);
    const Eigen::Index c = group_column(group_of[static_cast<std::size_t>(u)]);
    std::vector<double> lw(static_cast<std::size_t>(J));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = state.xi(u * n + i, k);
        for (int j = 0; j < J; ++j) {
            double v = std::log(state.p[kk](c, j));
            if (state.g(u, k) == 3) v += log_normal_precision(x, state.mu_subject[kk](u, j), state.s_subject[kk](u, j));
            lw[static_cast<std::size_t>(j)] = v;
        }
        state.eta(u * n + i, k) = static_cast<int>(draw_categorical_log(rng, lw)) + kFirstSubjectLabel;
    }
}

}  // namespace

void update_g(ModelState& state, std::span<const int> group_of, Rng& rng, const UpdateOptions& opt) {
    const Eigen::Index U = state.subjects(), K = state.components();
    for (Eigen::Index u = 0; u < U; ++u)
        for (Eigen::Index k = 0; k < K; ++k) {
            if (opt.collapsed_g) {
                const auto w = g_log_weights(state, group_of, u, k, true);
                state.g(u, k) = static_cast<int>(draw_categorical_log(rng, w)) + 1;
                draw_eta_row(state, group_of, u, k, rng);
            } else {
                draw_eta_row(state, group_of, u, k, rng);
                const auto w = g_log_weights(state, group_of, u, k, false);
                state.g(u, k) = static_cast<int>(draw_categorical_log(rng, w)) + 1;
            }
        }
}

void update_omega(ModelState& state, const HyperParams& hp, Rng& rng) {
    for (Eigen::Index k = 0; k < state.components(); ++k)
        state.omega.row(k) = draw_dirichlet(rng, omega_conditional(state, hp, k)).transpose();
}

void update_sticks(ModelState& state, std::span<const int> group_of, const HyperParams& hp, Rng& rng) {
    const int J = state.subject_labels();
    for (Eigen::Index k = 0; k < state.components(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        for (int code : {kGroupA, kGroupB}) {
            const Eigen::Index c = group_column(code);
            // The Beta conditional ignores the renormalising constant Z = 1 - prod(1 - p*), so it serves as an
            // independence proposal accepted with probability (Z_old / Z_new)^N.
            double occupied = 0;
            for (Eigen::Index u = 0; u < state.subjects(); ++u)
                if (state.g(u, k) == 3 && group_of[static_cast<std::size_t>(u)] == code) occupied += 1.0;
            occupied *= static_cast<double>(state.channels());
            auto log_norm = [&](const auto& row) { return std::log1p(-(1.0 - row.array()).prod()); };
            for (Eigen::Index j = 0; j < J; ++j) {
                const BetaParams post = stick_conditional(state, group_of, hp, k, code, j);
                const double proposal = clamp_open_unit(rng.beta(post.a, post.b));
                if (occupied > 0) {
                    Eigen::RowVectorXd next = state.p_star[kk].row(c);
                    next(j) = proposal;
                    const double log_accept = occupied * (log_norm(state.p_star[kk].row(c)) - log_norm(next));
                    if (log_accept < 0 && std::log(rng.uniform_open()) > log_accept) continue;
                }
                state.p_star[kk](c, j) = proposal;
            }
            state.p[kk].row(c) = sticks_to_weights(state.p_star[kk].row(c).transpose()).transpose();
        }
    }
}

ModelState draw_state_from_prior(const HyperParams& hp, Eigen::Index subjects, Eigen::Index channels,
                                 std::span<const int> group_of, Rng& rng) {
    const Eigen::Index K = hp.components();
    const int J = hp.subject_labels;
    ModelState s = ModelState::zeros(subjects, channels, K, J);
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        ClusterParams cp = draw_cluster(rng, 0, 0, 0, 0.0, 1.0 / hp.h_common_inv(k), hp.gamma_common(k), 1.0);
        s.mu_common(k) = cp.mean;
        s.s_common(k) = cp.precision;
        for (Eigen::Index c = 0; c < 2; ++c) {
            cp = draw_cluster(rng, 0, 0, 0, hp.phi_group(k, c), 1.0 / hp.h_group_inv(k, c), hp.gamma_group(k, c), 1.0);
            s.mu_group(k, c) = cp.mean;
            s.s_group(k, c) = cp.precision;
        }
        for (Eigen::Index u = 0; u < subjects; ++u) {
            const Eigen::Index c = group_column(group_of[static_cast<std::size_t>(u)]);
            for (int j = 0; j < J; ++j) {
                cp = draw_cluster(rng, 0, 0, 0, hp.phi_subject(k, c), 1.0 / hp.h_subject_inv(k, c),
                                  hp.gamma_subject(k, c), 1.0);
                s.mu_subject[kk](u, j) = cp.mean;
                s.s_subject[kk](u, j) = cp.precision;
            }
        }
        s.omega.row(k) = draw_dirichlet(rng, hp.delta).transpose();
        for (Eigen::Index c = 0; c < 2; ++c) {
            for (int j = 0; j < J; ++j) s.p_star[kk](c, j) = clamp_open_unit(rng.beta(1.0, hp.alpha(k)));
            s.p[kk].row(c) = sticks_to_weights(s.p_star[kk].row(c).transpose()).transpose();
        }
        for (Eigen::Index u = 0; u < subjects; ++u) {
            const std::array<double, 3> lw{std::log(s.omega(k, 0)), std::log(s.omega(k, 1)), std::log(s.omega(k, 2))};
            s.g(u, k) = static_cast<int>(draw_categorical_log(rng, lw)) + 1;
            draw_eta_row(s, group_of, u, k, rng);
        }
    }
    s.tau = std::max(rng.gamma(hp.tau_shape, hp.tau_rate), kTinyPrecision);
    for (Eigen::Index u = 0; u < subjects; ++u)
        for (Eigen::Index i = 0; i < channels; ++i)
            for (Eigen::Index k = 0; k < K; ++k) {
                const ClusterParams c = cluster_of(s, group_of, u, i, k);
                s.xi(u * channels + i, k) = rng.normal(c.mean, 1.0 / std::sqrt(c.precision));
            }
    return s;
}

ModelState empirical_start(const ModelData& data, const HyperParams& hp) {
    const Eigen::Index K = data.components(), U = data.subjects();
    const int J = hp.subject_labels;
    ModelState s = ModelState::zeros(U, data.channels, K, J);
    if (data.initial_scores.rows() == data.centred.rows() && data.initial_scores.cols() == K) s.xi = data.initial_scores;
    else s.xi = data.gram.ldlt().solve(data.projections.transpose()).transpose();
    auto precision_at_prior_mean = [](double gamma) { return 4.0 / (gamma * gamma); };
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        s.mu_common(k) = 0.0;
        s.s_common(k) = precision_at_prior_mean(hp.gamma_common(k));
        for (Eigen::Index c = 0; c < 2; ++c) {
            s.mu_group(k, c) = hp.phi_group(k, c);
            s.s_group(k, c) = precision_at_prior_mean(hp.gamma_group(k, c));
        }
        for (Eigen::Index u = 0; u < U; ++u) {
            const Eigen::Index c = group_column(data.group_of[static_cast<std::size_t>(u)]);
            s.mu_subject[kk].row(u).setConstant(hp.phi_subject(k, c));
            s.s_subject[kk].row(u).setConstant(precision_at_prior_mean(hp.gamma_subject(k, c)));
        }
        s.omega.row(k) = (hp.delta / hp.delta.sum()).transpose();
        for (Eigen::Index c = 0; c < 2; ++c) {
            s.p_star[kk].row(c).setConstant(1.0 / (1.0 + hp.alpha(k)));
            s.p[kk].row(c) = sticks_to_weights(s.p_star[kk].row(c).transpose()).transpose();
        }
    }
    const double ssr = residual_sum_squares(s, data);
    s.tau = ssr > 0 ? static_cast<double>(data.centred.size()) / ssr : 1.0;
    return s;
}

Eigen::MatrixXd draw_data_from_state(const ModelState& state, const Eigen::MatrixXd& eigenfunctions, Rng& rng) {
    Eigen::MatrixXd y = state.xi * eigenfunctions.transpose();
    const double sd = 1.0 / std::sqrt(state.tau);
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, c) += rng.normal(0.0, sd);
    return y;
}

void gibbs_sweep(ModelState& state, const ModelData& data, const HyperParams& hp, Rng& rng, const UpdateOptions& opt,
                 double& ssr) {
    update_xi(state, data, rng, opt, &ssr);
    update_tau(state, data, hp, rng, opt, ssr);
    update_cluster_params(state, data.group_of, hp, rng);
    update_g(state, data.group_of, rng, opt);
    update_omega(state, hp, rng);
    update_sticks(state, data.group_of, hp, rng);
}

std::vector<std::string> scalar_column_names(Eigen::Index components) {
    std::vector<std::string> names;
    for (Eigen::Index k = 1; k <= components; ++k) {
        const std::string s = std::to_string(k);
        for (int j = 1; j <= 3; ++j) names.push_back("omega_" + s + "_" + std::to_string(j));
        names.push_back("mu_common_" + s);
        names.push_back("s_common_" + s);
        names.push_back("mu_group_" + s + "_2");
        names.push_back("mu_group_" + s + "_3");
        names.push_back("s_group_" + s + "_2");
        names.push_back("s_group_" + s + "_3");
        names.push_back("n_common_" + s);
        names.push_back("n_group_" + s);
        names.push_back("n_subject_" + s);
    }
    names.push_back("tau");
    names.push_back("loglik");
    return names;
}

namespace {

void record_draw(ChainArchive& archive, long iteration, const ModelState& state, double loglik) {
    const Eigen::Index d = archive.draws();
    const Eigen::Index K = state.components(), U = state.subjects(), n = state.channels();
    Eigen::Index col = 0;
    for (Eigen::Index k = 0; k < K; ++k) {
        for (int j = 0; j < 3; ++j) archive.scalars(d, col++) = state.omega(k, j);
        archive.scalars(d, col++) = state.mu_common(k);
        archive.scalars(d, col++) = state.s_common(k);
        archive.scalars(d, col++) = state.mu_group(k, 0);
        archive.scalars(d, col++) = state.mu_group(k, 1);
        archive.scalars(d, col++) = state.s_group(k, 0);
        archive.scalars(d, col++) = state.s_group(k, 1);
        for (int level = 1; level <= 3; ++level)
            archive.scalars(d, col++) = static_cast<double>((state.g.col(k).array() == level).count());
    }
    archive.scalars(d, col++) = state.tau;
    archive.scalars(d, col++) = loglik;
    for (Eigen::Index u = 0; u < U; ++u)
        for (Eigen::Index k = 0; k < K; ++k) {
            archive.g(d, u * K + k) = state.g(u, k);
            if (state.g(u, k) == 3)
                for (Eigen::Index i = 0; i < n; ++i)
                    archive.eta.push_back({d, u, k, i, state.eta(u * n + i, k)});
        }
    archive.iterations.push_back(iteration);
}

}  // namespace

ChainArchive run_chain(const ModelData& data, const HyperParams& hp, const SamplerConfig& cfg, int chain,
                       const ChainOptions& opt) {
    cfg.validate();
    hp.validate();
    if (hp.components() != data.components()) throw DimensionError("hyperparameters and basis disagree on K");

    Rng rng(cfg.seed, static_cast<std::uint64_t>(chain) + 1);
    ChainArchive archive;
    archive.subjects = data.subjects();
    archive.channels = data.channels;
    archive.components = data.components();
    archive.scalar_names = scalar_column_names(data.components());
    archive.reserve(cfg.draws_per_chain(), static_cast<Eigen::Index>(archive.scalar_names.size()));

    ModelState state;
    double ssr = 0;
    long start = 1;
    if (opt.resume && !opt.checkpoint_dir.empty() && has_checkpoint(opt.checkpoint_dir)) {
        const Checkpoint cp = read_checkpoint(opt.checkpoint_dir, state, archive);
        rng.restore(cp.rng_state);
        ssr = cp.ssr;
        start = cp.next_iteration;
        archive.reserve(cfg.draws_per_chain(), static_cast<Eigen::Index>(archive.scalar_names.size()));
    } else {
        state = cfg.init_mode == InitMode::Empirical
                    ? empirical_start(data, hp)
                    : draw_state_from_prior(hp, data.subjects(), data.channels, data.group_of, rng);
        ssr = residual_sum_squares(state, data);
    }

    for (long it = start; it <= cfg.n_iter; ++it) {
        update_xi(state, data, rng, opt.updates, &ssr);
        check_finite(ssr, it, "xi");
        update_tau(state, data, hp, rng, opt.updates, ssr);
        check_finite(state.tau, it, "tau");
        update_cluster_params(state, data.group_of, hp, rng);
        check_finite(state.mu_common.sum() + state.s_common.sum() + state.mu_group.sum() + state.s_group.sum(), it,
                     "cluster_params");
        update_g(state, data.group_of, rng, opt.updates);
        update_omega(state, hp, rng);
        check_finite(state.omega.sum(), it, "omega");
        update_sticks(state, data.group_of, hp, rng);

        if (cfg.audit_every > 0 && it % cfg.audit_every == 0) {
            const double prior = logprior_scores(state, data.group_of);
            const double incremental = loglik_from_ssr(ssr, state.tau, data.centred.size()) + prior;
            const double exact_ssr = residual_sum_squares(state, data);
            const double recomputed = loglik_data(state, data) + prior;
            if (std::abs(incremental - recomputed) > 1e-8 * std::max(1.0, std::abs(recomputed)))
                throw NumericalError("log-joint audit failed at iteration " + std::to_string(it) + ": incremental " +
                                     format_double(incremental) + " vs recomputed " + format_double(recomputed));
            ssr = exact_ssr;
        }
        if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
            const double ll = opt.updates.use_likelihood ? loglik_from_ssr(ssr, state.tau, data.centred.size()) : 0.0;
            record_draw(archive, it, state, ll);
        }
        if (opt.observer) opt.observer(it, state);
        if (cfg.checkpoint_every > 0 && !opt.checkpoint_dir.empty() && it % cfg.checkpoint_every == 0 &&
            it < cfg.n_iter)
            write_checkpoint(opt.checkpoint_dir, Checkpoint{it + 1, rng.save(), ssr}, state, archive);
    }
    return archive;
}

std::vector<ChainArchive> run_chains(const ModelData& data, const HyperParams& hp, const SamplerConfig& cfg,
                                     int workers, const std::filesystem::path& checkpoint_root, bool resume) {
    cfg.validate();
    std::vector<ChainArchive> out(static_cast<std::size_t>(cfg.n_chains));
    std::vector<std::exception_ptr> errors(out.size());
    std::atomic<int> next{0};
    auto work = [&] {
        for (int c = next++; c < cfg.n_chains; c = next++) {
            try {
                ChainOptions opt;
                if (!checkpoint_root.empty()) opt.checkpoint_dir = checkpoint_root / ("chain_" + std::to_string(c + 1));
                opt.resume = resume;
                out[static_cast<std::size_t>(c)] = run_chain(data, hp, cfg, c, opt);
            } catch (...) {
                errors[static_cast<std::size_t>(c)] = std::current_exception();
            }
        }
    };
    const int n_workers = std::clamp(workers, 1, cfg.n_chains);
    if (n_workers == 1) work();
    else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace mlpp
