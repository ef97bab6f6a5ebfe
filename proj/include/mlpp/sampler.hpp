#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlpp/archive.hpp"
#include "mlpp/hyperparams.hpp"
#include "mlpp/model.hpp"
#include "mlpp/random.hpp"

namespace mlpp {

enum class InitMode { PriorDraw, Empirical };

struct SamplerConfig {
    long n_iter = 20000;
    long burn_in = 10000;
    long thin = 1;
    int n_chains = 2;
    std::uint64_t seed = 1;
    InitMode init_mode = InitMode::Empirical;
    long audit_every = 0;       // 0 disables the incremental/recomputed log-joint audit
    long checkpoint_every = 0;  // 0 disables checkpoints

    long draws_per_chain() const { return (n_iter - burn_in) / thin; }
    void validate() const;
};

struct UpdateOptions {
    bool use_likelihood = true;
    /// Marginalise eta when drawing g. The uncollapsed variant conditions on the current eta.
    bool collapsed_g = true;
};

struct NormalParams {
    double mean = 0;
    double variance = 1;
};

struct GammaParams {
    double shape = 1;
    double rate = 1;
};

struct BetaParams {
    double a = 1;
    double b = 1;
};

// Full-conditional parameters. Each update below draws from exactly these.

/// Conditional of xi(u, i, k) given every other score of the curve.
NormalParams xi_conditional(const ModelState& state, const ModelData& data, Eigen::Index u, Eigen::Index i,
                            Eigen::Index k, bool use_likelihood = true);

/// Conjugate Gamma conditional of tau given the residual sum of squares.
GammaParams tau_conditional(const HyperParams& hp, double ssr, Eigen::Index observations);

/// Dirichlet concentration delta + subject counts per level for dimension k.
Eigen::Vector3d omega_conditional(const ModelState& state, const HyperParams& hp, Eigen::Index k);

/// Beta conditional of stick j (0-based) for group `group_code` in dimension k.
BetaParams stick_conditional(const ModelState& state, std::span<const int> group_of, const HyperParams& hp,
                             Eigen::Index k, int group_code, Eigen::Index j);

/// Normal conditional of a cluster mean with m members summing to `sum`.
NormalParams cluster_mean_conditional(double prior_mean, double prior_precision, double precision, Eigen::Index members,
                                      double sum);

/// Unnormalised log weights of g(u, k) = 1, 2, 3.
std::array<double, 3> g_log_weights(const ModelState& state, std::span<const int> group_of, Eigen::Index u,
                                    Eigen::Index k, bool collapsed = true);

// Block updates in systematic-scan order.

/// When `ssr` is given it holds the current residual sum of squares and is kept up to date.
void update_xi(ModelState& state, const ModelData& data, Rng& rng, const UpdateOptions& opt = {},
               double* ssr = nullptr);
void update_tau(ModelState& state, const ModelData& data, const HyperParams& hp, Rng& rng,
                const UpdateOptions& opt = {}, std::optional<double> ssr = std::nullopt);
void update_cluster_params(ModelState& state, std::span<const int> group_of, const HyperParams& hp, Rng& rng);
void update_g(ModelState& state, std::span<const int> group_of, Rng& rng, const UpdateOptions& opt = {});
void update_omega(ModelState& state, const HyperParams& hp, Rng& rng);
void update_sticks(ModelState& state, std::span<const int> group_of, const HyperParams& hp, Rng& rng);

/// Draw mean and precision of one cluster from its conditional (prior when empty).
ClusterParams draw_cluster(Rng& rng, Eigen::Index members, double sum, double sum_sq, double prior_mean,
                           double prior_precision, double gamma_bound, double current_precision);

/// Every unknown drawn from the prior.
ModelState draw_state_from_prior(const HyperParams& hp, Eigen::Index subjects, Eigen::Index channels,
                                 std::span<const int> group_of, Rng& rng);

/// Deterministic start: empirical scores, everyone common, clusters at prior means.
ModelState empirical_start(const ModelData& data, const HyperParams& hp);

/// Centred curves drawn from the likelihood given a state.
Eigen::MatrixXd draw_data_from_state(const ModelState& state, const Eigen::MatrixXd& eigenfunctions, Rng& rng);

/// One full systematic scan. `ssr` is the cached residual sum of squares.
void gibbs_sweep(ModelState& state, const ModelData& data, const HyperParams& hp, Rng& rng,
                 const UpdateOptions& opt, double& ssr);

/// Observer invoked after every iteration with (1-based iteration, state).
using IterationObserver = std::function<void(long, const ModelState&)>;

struct ChainOptions {
    UpdateOptions updates;
    IterationObserver observer;
    /// Directory for checkpoints of this chain; empty disables them.
    std::filesystem::path checkpoint_dir;
    bool resume = false;
};

/// Column names of the scalar draws for K dimensions.
std::vector<std::string> scalar_column_names(Eigen::Index components);

/// Run one chain with sub-seed `chain` (0-based).
ChainArchive run_chain(const ModelData& data, const HyperParams& hp, const SamplerConfig& cfg, int chain,
                       const ChainOptions& opt = {});

/// Run cfg.n_chains chains, at most `workers` at a time.
std::vector<ChainArchive> run_chains(const ModelData& data, const HyperParams& hp, const SamplerConfig& cfg,
                                     int workers = 1, const std::filesystem::path& checkpoint_root = {},
                                     bool resume = false);

}  // namespace mlpp
