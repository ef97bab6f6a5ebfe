#include "mlpp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mlpp/archive.hpp"
#include "mlpp/error.hpp"

namespace mlpp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw InputError("ragged matrix in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size())
            throw InputError(path.filename().string() + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                             std::to_string(cells.size()) + " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (first) throw InputError(path.string() + " is empty");
    return t;
}

double parse_double(const std::string& text) {
    double v = 0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (b != e && *b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) {
        // from_chars rejects "inf"/"nan" spellings on some libraries; fall back to strtod for those.
        char* end = nullptr;
        v = std::strtod(text.c_str(), &end);
        if (text.empty() || end != text.c_str() + text.size()) throw InputError("not a number: '" + text + "'");
    }
    return v;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ',';
        out << (names.empty() ? "c" + std::to_string(c + 1) : names[static_cast<std::size_t>(c)]);
    }
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = parse_double(t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    return m;
}

FunctionalDataset<double> read_dataset(const fs::path& data_csv, const fs::path& time_csv) {
    const Eigen::MatrixXd grid = read_matrix_csv(time_csv);
    if (grid.cols() != 1) throw InputError("time grid file must have exactly one column");
    const CsvTable t = read_csv(data_csv);
    if (t.header.size() < 4) throw InputError("dataset needs subject_id, channel_id, group_code and values");
    const auto T = static_cast<Eigen::Index>(t.header.size() - 3);
    if (T != grid.rows())
        throw DimensionError("dataset has " + std::to_string(T) + " time points, grid has " + std::to_string(grid.rows()));

    FunctionalDataset<double> d;
    std::map<std::string, std::size_t> subject_index, channel_index;
    for (const auto& row : t.rows) {
        if (subject_index.emplace(row[0], d.subject_ids.size()).second) {
            d.subject_ids.push_back(row[0]);
            const double code = parse_double(row[2]);
            d.group_of.push_back(static_cast<int>(code));
            if (code != kGroupA && code != kGroupB) throw InputError("group_code must be 2 or 3, got " + row[2]);
        }
        if (channel_index.emplace(row[1], d.channel_ids.size()).second) d.channel_ids.push_back(row[1]);
    }
    d.subjects = static_cast<Eigen::Index>(d.subject_ids.size());
    d.channels = static_cast<Eigen::Index>(d.channel_ids.size());
    if (static_cast<Eigen::Index>(t.rows.size()) != d.subjects * d.channels)
        throw DimensionError("every subject must have one row per channel (" + std::to_string(d.subjects) + " subjects x " +
                             std::to_string(d.channels) + " channels, " + std::to_string(t.rows.size()) + " rows)");
    d.values.resize(d.subjects * d.channels, T);
    std::vector<char> seen(static_cast<std::size_t>(d.subjects * d.channels), 0);
    for (const auto& row : t.rows) {
        const auto u = subject_index.at(row[0]);
        const auto i = channel_index.at(row[1]);
        if (static_cast<int>(parse_double(row[2])) != d.group_of[u])
            throw InputError("subject " + row[0] + " has more than one group code");
        const auto r = static_cast<Eigen::Index>(u) * d.channels + static_cast<Eigen::Index>(i);
        if (seen[static_cast<std::size_t>(r)]++) throw InputError("duplicate row for subject " + row[0] + ", channel " + row[1]);
        for (Eigen::Index c = 0; c < T; ++c) d.values(r, c) = parse_double(row[static_cast<std::size_t>(c + 3)]);
    }
    d.time_grid = grid.col(0);
    d.validate();
    return d;
}

void write_dataset(const FunctionalDataset<double>& data, const fs::path& data_csv, const fs::path& time_csv) {
    data.validate();
    write_matrix_csv(time_csv, data.time_grid, {"time"});
    std::ofstream out(data_csv, std::ios::binary);
    if (!out) throw InputError("cannot write " + data_csv.string());
    out << "subject_id,channel_id,group_code";
    for (Eigen::Index t = 0; t < data.timepoints(); ++t) out << ",t" << t + 1;
    out << '\n';
    for (Eigen::Index u = 0; u < data.subjects; ++u)
        for (Eigen::Index i = 0; i < data.channels; ++i) {
            out << (data.subject_ids.empty() ? std::to_string(u + 1) : data.subject_ids[static_cast<std::size_t>(u)]) << ','
                << (data.channel_ids.empty() ? std::to_string(i + 1) : data.channel_ids[static_cast<std::size_t>(i)]) << ','
                << data.group_of[static_cast<std::size_t>(u)];
            for (Eigen::Index t = 0; t < data.timepoints(); ++t) out << ',' << format_double(data.values(data.row(u, i), t));
            out << '\n';
        }
}

void write_basis(const EigenBasis<double>& basis, const fs::path& dir) {
    fs::create_directories(dir);
    json j;
    j["K"] = basis.components();
    j["eigenvalues"] = to_json(basis.eigenvalues);
    j["var_explained"] = to_json(basis.var_explained);
    j["subjects"] = basis.subjects;
    j["channels"] = basis.channels;
    write_text(dir / "basis.json", j.dump(2) + "\n");
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < basis.components(); ++k) names.push_back("phi_" + std::to_string(k + 1));
    Eigen::MatrixXd mean(basis.mean_curve.size(), 2);
    mean << basis.time_grid, basis.mean_curve;
    write_matrix_csv(dir / "mean.csv", mean, {"time", "mean"});
    write_matrix_csv(dir / "eigenfunctions.csv", basis.eigenfunctions, names);
    for (auto& n : names) n.replace(0, 3, "xi");
    write_matrix_csv(dir / "scores.csv", basis.scores, names);
}

EigenBasis<double> read_basis(const fs::path& dir) {
    const json j = read_json(dir / "basis.json");
    EigenBasis<double> b;
    b.eigenvalues = vector_from(j.at("eigenvalues"));
    b.var_explained = vector_from(j.at("var_explained"));
    b.subjects = j.value("subjects", Eigen::Index{0});
    b.channels = j.value("channels", Eigen::Index{0});
    const Eigen::MatrixXd mean = read_matrix_csv(dir / "mean.csv");
    if (mean.cols() != 2) throw InputError("mean.csv must have time and mean columns");
    b.time_grid = mean.col(0);
    b.mean_curve = mean.col(1);
    b.eigenfunctions = read_matrix_csv(dir / "eigenfunctions.csv");
    if (fs::exists(dir / "scores.csv")) b.scores = read_matrix_csv(dir / "scores.csv");
    if (b.eigenfunctions.cols() != j.at("K").get<Eigen::Index>() || b.eigenfunctions.rows() != b.mean_curve.size())
        throw DimensionError("basis files disagree on shape");
    return b;
}

void write_hyperparams(const HyperParams& hp, const fs::path& path) {
    json j;
    j["h_common_inv"] = to_json(hp.h_common_inv);
    j["gamma_common"] = to_json(hp.gamma_common);
    j["phi_group"] = to_json(hp.phi_group);
    j["h_group_inv"] = to_json(hp.h_group_inv);
    j["gamma_group"] = to_json(hp.gamma_group);
    j["phi_subject"] = to_json(hp.phi_subject);
    j["h_subject_inv"] = to_json(hp.h_subject_inv);
    j["gamma_subject"] = to_json(hp.gamma_subject);
    j["delta"] = to_json(Eigen::VectorXd(hp.delta));
    j["alpha"] = to_json(hp.alpha);
    j["tau_shape"] = hp.tau_shape;
    j["tau_rate"] = hp.tau_rate;
    j["subject_labels"] = hp.subject_labels;
    j["bootstrap_factor"] = hp.bootstrap_factor;
    j["gamma_exponent"] = hp.gamma_exponent;
    json s;
    s["sd_all"] = to_json(hp.stats.sd_all);
    s["boot_var_all"] = to_json(hp.stats.boot_var_all);
    s["mean_group"] = to_json(hp.stats.mean_group);
    s["sd_group"] = to_json(hp.stats.sd_group);
    s["boot_var_group"] = to_json(hp.stats.boot_var_group);
    s["range_group"] = to_json(hp.stats.range_group);
    j["score_statistics"] = s;
    write_text(path, j.dump(2) + "\n");
}

HyperParams read_hyperparams(const fs::path& path) {
    const json j = read_json(path);
    HyperParams hp;
    try {
        hp.h_common_inv = vector_from(j.at("h_common_inv"));
        hp.gamma_common = vector_from(j.at("gamma_common"));
        hp.phi_group = matrix_from(j.at("phi_group"));
        hp.h_group_inv = matrix_from(j.at("h_group_inv"));
        hp.gamma_group = matrix_from(j.at("gamma_group"));
        hp.phi_subject = matrix_from(j.at("phi_subject"));
        hp.h_subject_inv = matrix_from(j.at("h_subject_inv"));
        hp.gamma_subject = matrix_from(j.at("gamma_subject"));
        const Eigen::VectorXd delta = vector_from(j.at("delta"));
        if (delta.size() != 3) throw InputError("delta must have three entries");
        hp.delta = delta;
        hp.alpha = vector_from(j.at("alpha"));
        hp.tau_shape = j.at("tau_shape").get<double>();
        hp.tau_rate = j.at("tau_rate").get<double>();
        hp.subject_labels = j.at("subject_labels").get<int>();
        hp.bootstrap_factor = j.value("bootstrap_factor", 2.0);
        hp.gamma_exponent = j.value("gamma_exponent", 2.0);
        if (j.contains("score_statistics")) {
            const json& s = j["score_statistics"];
            hp.stats.sd_all = vector_from(s.at("sd_all"));
            hp.stats.boot_var_all = vector_from(s.at("boot_var_all"));
            hp.stats.mean_group = matrix_from(s.at("mean_group"));
            hp.stats.sd_group = matrix_from(s.at("sd_group"));
            hp.stats.boot_var_group = matrix_from(s.at("boot_var_group"));
            hp.stats.range_group = matrix_from(s.at("range_group"));
        }
    } catch (const json::exception& e) {
        throw InputError("hyperparameter file " + path.string() + ": " + e.what());
    }
    hp.validate();
    return hp;
}

std::string file_hash(const fs::path& path) {
    const std::string bytes = read_text(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

}  // namespace mlpp
