#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace mlpp {

struct ModelState;
class Rng;

/// Recording-level label of score (subject, dimension, channel) in one retained draw.
/// Only stored where the subject is in a subject-specific allocation.
struct EtaRecord {
    Eigen::Index draw = 0;
    Eigen::Index subject = 0;
    Eigen::Index component = 0;
    Eigen::Index channel = 0;
    int label = 0;

    friend bool operator==(const EtaRecord&, const EtaRecord&) = default;
};

/// Thinned post-burn-in draws of one chain.
struct ChainArchive {
    Eigen::Index subjects = 0;
    Eigen::Index channels = 0;
    Eigen::Index components = 0;

    std::vector<std::string> scalar_names;
    std::vector<long> iterations;
    Eigen::MatrixXd scalars;  // draws x scalar_names
    Eigen::MatrixXi g;        // draws x (U * K), column u * K + k
    std::vector<EtaRecord> eta;

    Eigen::Index draws() const { return static_cast<Eigen::Index>(iterations.size()); }
    int g_at(Eigen::Index draw, Eigen::Index u, Eigen::Index k) const { return g(draw, u * components + k); }
    Eigen::Index scalar_index(const std::string& name) const;

    /// Grow storage to hold `count` draws.
    void reserve(Eigen::Index count, Eigen::Index columns);
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Writes draws_scalar.csv, labels_g.csv and labels_eta.csv into `dir`.
void write_chain_archive(const ChainArchive& archive, const std::filesystem::path& dir);

/// Inverse of write_chain_archive; the shape fields must be supplied by the caller.
ChainArchive read_chain_archive(const std::filesystem::path& dir, Eigen::Index subjects, Eigen::Index channels,
                                Eigen::Index components);

/// State snapshot: JSON for scalars and labels, CSV for the score tensor.
void write_state(const ModelState& state, const std::filesystem::path& json_path, const std::filesystem::path& xi_csv);
ModelState read_state(const std::filesystem::path& json_path, const std::filesystem::path& xi_csv);

/// Checkpoint of a running chain: state, random engine, next iteration and the draws so far.
struct Checkpoint {
    long next_iteration = 1;
    std::string rng_state;
    double ssr = 0;
};

void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& cp, const ModelState& state,
                      const ChainArchive& archive);
bool has_checkpoint(const std::filesystem::path& dir);
Checkpoint read_checkpoint(const std::filesystem::path& dir, ModelState& state, ChainArchive& archive);

}  // namespace mlpp
