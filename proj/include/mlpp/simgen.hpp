#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "mlpp/fpca.hpp"
#include "mlpp/partitions.hpp"

namespace mlpp {

/// Design of a synthetic multilevel dataset with planted cluster structure.
///
/// Curves live on the grid t = 1..T. Score means and sds are stated for eigenfunctions
/// normalised on the unit interval, so scores on the emitted grid are sqrt(T - 1) times larger.
struct SimDesign {
    Eigen::Index subjects = 40;
    Eigen::Index channels = 50;
    Eigen::Index timepoints = 150;
    Eigen::Index group_a = 0;  // subjects 1..group_a get code 2, the rest code 3; 0 splits in half
    /// Score means, rows = group (code 2, code 3), columns = dimension.
    Eigen::Matrix2d score_means{{2.0, 2.0}, {-2.0, -2.0}};
    double score_sd = 0.5;
    /// Shift of the second cluster of outlier subjects in dimension 2, away from zero.
    double outlier_offset = 3.0;
    std::vector<Eigen::Index> outliers;  // 0-based; empty means {0, 1, U-2, U-1}
    double snr = 6.0;                    // infinity gives noiseless curves
    std::uint64_t seed = 1;

    Eigen::Index group_a_size() const { return group_a > 0 ? group_a : subjects / 2; }
    std::vector<Eigen::Index> outlier_subjects() const;
    void validate() const;
};

struct RecordingTruth {
    Eigen::Index subject = 0;
    Eigen::Index component = 0;
    Labels labels;  // per channel
};

struct GroundTruth {
    /// Per dimension, subject-level partition coded as in subject_partition.
    std::vector<Labels> subject_level;
    /// Per dimension, allocation per subject (1 common, 2 group, 3 subject-specific).
    std::vector<std::vector<int>> allocation;
    std::vector<RecordingTruth> recording_level;
    Eigen::MatrixXd scores;      // (U * n) x 2, on the emitted grid
    Eigen::MatrixXd noiseless;   // (U * n) x T
    Eigen::MatrixXd eigenfunctions;
    double noise_variance = 0;
};

/// Two smooth curves on the grid 1..T, orthonormal under trapezoid quadrature:
/// a single bump and a two-lobed wave.
Eigen::MatrixXd make_eigenfunctions(Eigen::Index timepoints);

/// The grid 1..T used by simulate.
Eigen::VectorXd simulation_grid(Eigen::Index timepoints);

struct Simulation {
    FunctionalDataset<double> data;
    GroundTruth truth;
};

Simulation simulate(const SimDesign& design);

void write_truth(const GroundTruth& truth, const SimDesign& design, const std::filesystem::path& path);

/// Reads the partition parts of truth.json (scores and curves are not stored there).
GroundTruth read_truth(const std::filesystem::path& path);

}  // namespace mlpp
