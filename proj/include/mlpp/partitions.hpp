#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "mlpp/archive.hpp"

namespace mlpp {

/// Cluster labels over items. Only co-membership matters to the metrics below.
using Labels = std::vector<int>;

/// Relabel clusters 0, 1, ... in order of first appearance.
Labels canonical_labels(std::span<const int> labels);

int cluster_count(std::span<const int> labels);

/// Same partition up to relabeling.
bool same_partition(std::span<const int> a, std::span<const int> b);

/// Contingency table with rows for the clusters of `a` and columns for `b` (canonical order).
Eigen::MatrixXi contingency_table(std::span<const int> a, std::span<const int> b);

/// Hubert-Arabie adjusted Rand index. Two single-cluster partitions give 1.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Variation of information in bits.
double variation_of_information(std::span<const int> a, std::span<const int> b);

/// Fraction of draws in which each pair of items shares a cluster.
Eigen::MatrixXd similarity_matrix(const std::vector<Labels>& draws);

enum class ExpectedViMethod {
    LowerBound,  // Jensen lower bound computed from the similarity matrix
    Exact,       // average VI to every draw
};

/// Posterior expected VI of `candidate` under the draws.
double expected_vi(std::span<const int> candidate, const std::vector<Labels>& draws, const Eigen::MatrixXd& similarity,
                   ExpectedViMethod method);

struct PointEstimate {
    Labels labels;
    std::size_t draw_index = 0;
    double expected_vi = 0;
};

/// Drawn partition minimising the expected VI; ties go to fewer clusters, then the earliest draw.
PointEstimate vi_point_estimate(const std::vector<Labels>& draws,
                                ExpectedViMethod method = ExpectedViMethod::LowerBound);

struct BallBound {
    Labels labels;
    int clusters = 0;
    double distance = 0;   // VI to the point estimate
    double frequency = 0;  // fraction of draws equal to this partition
};

struct CredibleBall {
    Labels estimate;
    double estimate_frequency = 0;
    double level = 0.95;
    double epsilon = 0;
    std::vector<BallBound> vertical_upper;  // fewest clusters, farthest first
    std::vector<BallBound> vertical_lower;  // most clusters, farthest first
    std::vector<BallBound> horizontal;      // largest distance
};

/// Smallest VI ball around `estimate` holding at least `level` of the draws, with its bounds.
CredibleBall credible_ball(const std::vector<Labels>& draws, std::span<const int> estimate, double level = 0.95);

/// Minimum number of items to move to turn `estimate` into `truth` (optimal cluster matching).
int classification_error(std::span<const int> truth, std::span<const int> estimate);

/// Maximum-weight assignment of rows to columns; returns the matched column per row (-1 if unmatched).
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weight);

/// Subject-level partition of dimension k: common subjects share label 1, group subjects their group
/// code, and subject-specific subjects get singleton labels 4 + u.
Labels subject_partition(std::span<const int> g_column, std::span<const int> group_of);

/// Subject-level partitions of every retained draw of every chain.
std::vector<Labels> subject_level_draws(const std::vector<ChainArchive>& chains, Eigen::Index k,
                                        std::span<const int> group_of);

/// Recording-level partitions (channels of subject u in dimension k) of every retained draw.
/// Channels share a cluster iff their z labels agree.
std::vector<Labels> recording_level_draws(const std::vector<ChainArchive>& chains, Eigen::Index u, Eigen::Index k,
                                          std::span<const int> group_of);

}  // namespace mlpp
