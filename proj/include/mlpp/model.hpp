#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "mlpp/fpca.hpp"
#include "mlpp/hyperparams.hpp"

namespace mlpp {

/// Subject-level allocation: which family of clusters a subject's scores use in a dimension.
enum class Level : int { Common = 1, Group = 2, Subject = 3 };

/// First subject-specific cluster label; labels run kFirstSubjectLabel .. 3 + J_S.
inline constexpr int kFirstSubjectLabel = 4;

/// Centred data and basis as seen by the sampler.
///
/// `centred` is (U * n) x T, row `u * channels + i`. `projections` and `gram`
/// cache the unweighted products the Gaussian likelihood needs.
struct ModelData {
    Eigen::MatrixXd centred;
    Eigen::MatrixXd eigenfunctions;  // T x K
    std::vector<int> group_of;       // per subject, 2 or 3
    Eigen::Index channels = 0;
    Eigen::MatrixXd initial_scores;  // empirical scores used by the empirical start; may be empty

    Eigen::MatrixXd projections;  // centred * eigenfunctions
    Eigen::MatrixXd gram;         // eigenfunctions^T eigenfunctions
    double centred_sq_norm = 0;

    Eigen::Index subjects() const { return static_cast<Eigen::Index>(group_of.size()); }
    Eigen::Index components() const { return eigenfunctions.cols(); }
    Eigen::Index timepoints() const { return eigenfunctions.rows(); }
    Eigen::Index row(Eigen::Index u, Eigen::Index i) const { return u * channels + i; }

    /// Recompute the cached products after `centred` or `eigenfunctions` change.
    void refresh();
};

/// Centre the (smoothed) curves with the basis mean and cache the likelihood products.
ModelData make_model_data(const FunctionalDataset<double>& data, const EigenBasis<double>& basis);

/// One complete MCMC state.
struct ModelState {
    Eigen::MatrixXd xi;   // (U * n) x K
    double tau = 1.0;
    Eigen::MatrixXi g;    // U x K, values in {1, 2, 3}
    Eigen::MatrixXi eta;  // (U * n) x K, values in {4 .. 3 + J_S}

    Eigen::VectorXd mu_common;
    Eigen::VectorXd s_common;
    Eigen::MatrixXd mu_group;  // K x 2
    Eigen::MatrixXd s_group;   // K x 2
    std::vector<Eigen::MatrixXd> mu_subject;  // per k: U x J_S
    std::vector<Eigen::MatrixXd> s_subject;   // per k: U x J_S

    Eigen::MatrixXd omega;                // K x 3
    std::vector<Eigen::MatrixXd> p_star;  // per k: 2 x J_S raw sticks
    std::vector<Eigen::MatrixXd> p;       // per k: 2 x J_S weights

    Eigen::Index subjects() const { return g.rows(); }
    Eigen::Index components() const { return g.cols(); }
    Eigen::Index channels() const { return g.rows() > 0 ? xi.rows() / g.rows() : 0; }
    int subject_labels() const { return mu_subject.empty() ? 0 : static_cast<int>(mu_subject.front().cols()); }

    /// Allocate a state of the given shape; values are placeholders until initialised.
    static ModelState zeros(Eigen::Index subjects, Eigen::Index channels, Eigen::Index components, int subject_labels);

    /// Throws InputError when a label, weight or precision violates its constraint.
    void validate(std::span<const int> group_of) const;
};

/// Mean and precision of one Gaussian cluster.
struct ClusterParams {
    double mean = 0;
    double precision = 1;
};

/// z = 1 for common, the group code for group, eta for subject-specific allocations.
Eigen::MatrixXi derive_z(const Eigen::MatrixXi& g, const Eigen::MatrixXi& eta, std::span<const int> group_of,
                         int subject_labels);

/// Cluster parameters selected by label z for score (u, k).
ClusterParams cluster_for_label(const ModelState& state, Eigen::Index u, Eigen::Index k, int z);

/// Cluster parameters currently governing score (u, i, k).
ClusterParams cluster_of(const ModelState& state, std::span<const int> group_of, Eigen::Index u, Eigen::Index i,
                         Eigen::Index k);

/// Truncated stick-breaking weights, renormalised to sum to one.
Eigen::VectorXd sticks_to_weights(const Eigen::Ref<const Eigen::VectorXd>& p_star);

/// Residual sum of squares of the centred data against the score reconstruction.
double residual_sum_squares(const ModelState& state, const ModelData& data);

/// Gaussian log-likelihood of the centred data with noise precision tau.
double loglik_data(const ModelState& state, const ModelData& data);

/// Log-likelihood from a precomputed residual sum of squares.
double loglik_from_ssr(double ssr, double tau, Eigen::Index observations);

/// Sum of log N(xi; cluster mean, 1 / cluster precision) over every score.
double logprior_scores(const ModelState& state, std::span<const int> group_of);

}  // namespace mlpp
