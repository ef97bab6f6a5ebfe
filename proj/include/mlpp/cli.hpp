#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlpp/partitions.hpp"
#include "mlpp/sampler.hpp"
#include "mlpp/simgen.hpp"

namespace mlpp {

struct SimulateArgs {
    SimDesign design;
    int replicates = 1;
    std::filesystem::path out;
    bool force = false;
};

/// Writes OUT/replicate_XXX/{data.csv, time.csv, truth.json, true_scores.csv, basis/}.
void cmd_simulate(const SimulateArgs& args);

struct FitArgs {
    std::filesystem::path data;
    std::filesystem::path time;
    std::filesystem::path out;
    long iters = 20000;
    long burnin = 10000;
    long thin = 1;
    int chains = 2;
    std::uint64_t seed = 1;
    std::string scenario;
    std::filesystem::path hyperparams;
    std::filesystem::path basis;  // directory with eigenfunctions.csv; skips fPCA
    double var_threshold = 0.8;
    double min_share = 0.15;
    long basis_size = 20;
    std::optional<double> penalty;
    bool no_smooth = false;
    int boot_reps = 1000;
    int subject_labels = 10;
    std::vector<std::string> overrides;  // key=value
    std::string init = "empirical";
    long audit_every = 0;
    long checkpoint_every = 0;
    bool resume = false;
    bool force = false;
    int workers = 0;  // 0: hardware concurrency capped by MLPP_THREADS
};

void cmd_fit(const FitArgs& args);

struct DiagnoseArgs {
    std::filesystem::path run;
    double rhat_threshold = 1.1;
    double ess_threshold = 1000;
    int bins = 30;
    int kde_points = 256;
};

/// Returns the number of flagged parameters.
int cmd_diagnose(const DiagnoseArgs& args);

struct SummarizeArgs {
    std::filesystem::path run;
    std::filesystem::path truth;
    double level = 0.95;
    bool exact_expected_vi = false;
};

void cmd_summarize(const SummarizeArgs& args);

/// Posterior partition summary of one dimension.
struct DimensionSummary {
    Labels estimate;
    double expected_vi = 0;
    CredibleBall ball;
    Eigen::MatrixXd similarity;
    Eigen::VectorXd subject_specific_prob;  // per subject, fraction of draws with g = 3
    struct Recording {
        Eigen::Index subject = 0;
        Labels estimate;
        CredibleBall ball;
    };
    std::vector<Recording> recording;  // subjects with subject_specific_prob > 0.5
};

std::vector<DimensionSummary> summarize_chains(const std::vector<ChainArchive>& chains, std::span<const int> group_of,
                                               double level = 0.95,
                                               ExpectedViMethod method = ExpectedViMethod::LowerBound);

/// Recording-level point estimate of one subject and dimension.
Labels recording_estimate(const std::vector<ChainArchive>& chains, Eigen::Index u, Eigen::Index k,
                          std::span<const int> group_of, ExpectedViMethod method = ExpectedViMethod::LowerBound);

/// Worker count: requested (or hardware concurrency when 0) capped by MLPP_THREADS.
int worker_count(int requested);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace mlpp
