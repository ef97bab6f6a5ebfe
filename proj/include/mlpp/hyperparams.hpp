#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "mlpp/fpca.hpp"

namespace mlpp {

/// Summary statistics of the empirical scores that the prior recipes are built from.
///
/// Group-indexed matrices are K x 2 with column 0 for group code 2 and column 1 for code 3.
struct ScoreStatistics {
    Eigen::VectorXd sd_all;          // sample sd of all scores in k
    Eigen::VectorXd boot_var_all;    // variance of bootstrap means, full pooled resamples
    Eigen::MatrixXd mean_group;
    Eigen::MatrixXd sd_group;
    Eigen::MatrixXd boot_var_group;  // variance of bootstrap means, half-size group resamples
    Eigen::MatrixXd range_group;
};

/// Fixed prior constants of the multilevel partition model.
struct HyperParams {
    // Common cluster, per k.
    Eigen::VectorXd h_common_inv;
    Eigen::VectorXd gamma_common;
    // Group clusters, K x 2.
    Eigen::MatrixXd phi_group;
    Eigen::MatrixXd h_group_inv;
    Eigen::MatrixXd gamma_group;
    // Subject-specific clusters: one value per (k, group) shared by every subject and label.
    Eigen::MatrixXd phi_subject;
    Eigen::MatrixXd h_subject_inv;
    Eigen::MatrixXd gamma_subject;

    Eigen::Vector3d delta{0.45, 0.45, 0.10};
    Eigen::VectorXd alpha;
    double tau_shape = 0.01;
    double tau_rate = 0.01;
    int subject_labels = 10;  // J_S; subject-specific labels are 4..3+J_S

    // Recipe knobs, kept so that scenarios can rebuild derived fields.
    double bootstrap_factor = 2.0;
    double gamma_exponent = 2.0;
    ScoreStatistics stats;

    Eigen::Index components() const { return h_common_inv.size(); }

    /// Throws InputError if a variance or bound is not strictly positive.
    void validate() const;
};

struct HyperParamOptions {
    int boot_reps = 1000;
    std::uint64_t seed = 1;
    int subject_labels = 10;
    double tau_shape = 0.01;
    double tau_rate = 0.01;
};

/// Column 0 for group code 2, column 1 for group code 3.
inline Eigen::Index group_column(int group_code) { return group_code - kGroupA; }

/// Variance (n-1 divisor) of `reps` bootstrap means of resamples of size `size` drawn with replacement.
double bootstrap_mean_variance(std::span<const double> sample, Eigen::Index size, int reps, std::uint64_t seed);

/// Empirical-Bayes recipe for every prior constant.
HyperParams estimate_hyperparams(const Eigen::MatrixXd& scores, Eigen::Index channels, std::span<const int> group_of,
                                 const HyperParamOptions& opt = {});

inline HyperParams estimate_hyperparams(const EigenBasis<double>& basis, std::span<const int> group_of,
                                        const HyperParamOptions& opt = {}) {
    return estimate_hyperparams(basis.scores, basis.channels, group_of, opt);
}

/// Recompute the bootstrap- and sd-derived fields from `stats` and the recipe knobs.
void rebuild_from_statistics(HyperParams& hp);

enum class Scenario { S1 = 1, S2, S3, S4, S5, S6 };

/// Parses "S1".."S6" (case-insensitive). Throws InputError otherwise.
Scenario parse_scenario(const std::string& key);

/// Sensitivity scenarios; scenarios that rescale recipes rebuild the derived fields.
HyperParams apply_scenario(HyperParams hp, Scenario scenario);

/// Patch individual fields. Keys: delta, alpha, alpha[k], tau_shape, tau_rate, subject_labels,
/// and any per-k field with an index, e.g. gamma_common[1] or phi_group[1,2] (1-based k, group code).
/// Whole-vector fields accept a comma-separated list.
HyperParams apply_overrides(HyperParams hp, const std::map<std::string, std::string>& overrides);

}  // namespace mlpp
