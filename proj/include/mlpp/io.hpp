#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlpp/fpca.hpp"
#include "mlpp/hyperparams.hpp"

namespace mlpp {

/// Plain comma-separated table. The first line is always taken as the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Strict decimal parse; throws InputError on trailing garbage.
double parse_double(const std::string& text);

/// Numeric matrix with a header line of column names (generated when empty).
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& names = {});
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Curves: one row per (subject, channel) with columns subject_id, channel_id, group_code, then T values.
/// Rows may come in any order; subjects and channels are numbered by first appearance.
FunctionalDataset<double> read_dataset(const std::filesystem::path& data_csv, const std::filesystem::path& time_csv);
void write_dataset(const FunctionalDataset<double>& data, const std::filesystem::path& data_csv,
                   const std::filesystem::path& time_csv);

/// basis.json (K, eigenvalues, var_explained, shape) plus mean.csv, eigenfunctions.csv, scores.csv.
void write_basis(const EigenBasis<double>& basis, const std::filesystem::path& dir);
EigenBasis<double> read_basis(const std::filesystem::path& dir);

void write_hyperparams(const HyperParams& hp, const std::filesystem::path& path);
HyperParams read_hyperparams(const std::filesystem::path& path);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Whole file as a string; throws InputError when unreadable.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mlpp
