#include "mlpp/archive.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlpp/error.hpp"
#include "mlpp/io.hpp"
#include "mlpp/model.hpp"

namespace mlpp {

namespace fs = std::filesystem;
using nlohmann::json;

Eigen::Index ChainArchive::scalar_index(const std::string& name) const {
    for (std::size_t c = 0; c < scalar_names.size(); ++c)
        if (scalar_names[c] == name) return static_cast<Eigen::Index>(c);
    throw InputError("no scalar column named '" + name + "'");
}

void ChainArchive::reserve(Eigen::Index count, Eigen::Index columns) {
    const Eigen::Index rows = std::max(count, draws());
    scalars.conservativeResize(rows, columns);
    g.conservativeResize(rows, subjects * components);
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json imatrix_to_json(const Eigen::MatrixXi& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

template <typename Matrix>
Matrix matrix_from_json(const json& j) {
    using Scalar = typename Matrix::Scalar;
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw InputError("ragged matrix in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<Scalar>();
    }
    return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
}

}  // namespace

void write_chain_archive(const ChainArchive& archive, const fs::path& dir) {
    fs::create_directories(dir);
    const Eigen::Index D = archive.draws();
    {
        std::ofstream out(dir / "draws_scalar.csv", std::ios::binary);
        if (!out) throw InputError("cannot write " + (dir / "draws_scalar.csv").string());
        out << "iteration";
        for (const auto& name : archive.scalar_names) out << ',' << name;
        out << '\n';
        for (Eigen::Index d = 0; d < D; ++d) {
            out << archive.iterations[static_cast<std::size_t>(d)];
            for (Eigen::Index c = 0; c < archive.scalars.cols(); ++c) out << ',' << format_double(archive.scalars(d, c));
            out << '\n';
        }
    }
    {
        std::ofstream out(dir / "labels_g.csv", std::ios::binary);
        if (!out) throw InputError("cannot write labels_g.csv");
        out << "iteration";
        for (Eigen::Index u = 0; u < archive.subjects; ++u)
            for (Eigen::Index k = 0; k < archive.components; ++k) out << ",g_u" << u + 1 << "_k" << k + 1;
        out << '\n';
        for (Eigen::Index d = 0; d < D; ++d) {
            out << archive.iterations[static_cast<std::size_t>(d)];
            for (Eigen::Index c = 0; c < archive.g.cols(); ++c) out << ',' << archive.g(d, c);
            out << '\n';
        }
    }
    {
        std::ofstream out(dir / "labels_eta.csv", std::ios::binary);
        if (!out) throw InputError("cannot write labels_eta.csv");
        out << "iteration,subject,dimension,channel,eta\n";
        for (const EtaRecord& e : archive.eta)
            out << archive.iterations[static_cast<std::size_t>(e.draw)] << ',' << e.subject + 1 << ','
                << e.component + 1 << ',' << e.channel + 1 << ',' << e.label << '\n';
    }
}

ChainArchive read_chain_archive(const fs::path& dir, Eigen::Index subjects, Eigen::Index channels,
                                Eigen::Index components) {
    ChainArchive a;
    a.subjects = subjects;
    a.channels = channels;
    a.components = components;

    const CsvTable scalars = read_csv(dir / "draws_scalar.csv");
    if (scalars.header.empty() || scalars.header.front() != "iteration")
        throw InputError("draws_scalar.csv must start with an iteration column");
    a.scalar_names.assign(scalars.header.begin() + 1, scalars.header.end());
    const auto D = static_cast<Eigen::Index>(scalars.rows.size());
    const auto cols = static_cast<Eigen::Index>(a.scalar_names.size());
    a.scalars.resize(D, cols);
    for (Eigen::Index d = 0; d < D; ++d) {
        const auto& row = scalars.rows[static_cast<std::size_t>(d)];
        a.iterations.push_back(static_cast<long>(parse_double(row[0])));
        for (Eigen::Index c = 0; c < cols; ++c) a.scalars(d, c) = parse_double(row[static_cast<std::size_t>(c + 1)]);
    }

    const CsvTable g = read_csv(dir / "labels_g.csv");
    if (static_cast<Eigen::Index>(g.header.size()) != 1 + subjects * components)
        throw DimensionError("labels_g.csv has the wrong number of columns");
    if (static_cast<Eigen::Index>(g.rows.size()) != D) throw DimensionError("labels_g.csv and draws_scalar.csv differ in rows");
    a.g.resize(D, subjects * components);
    for (Eigen::Index d = 0; d < D; ++d)
        for (Eigen::Index c = 0; c < a.g.cols(); ++c)
            a.g(d, c) = static_cast<int>(parse_double(g.rows[static_cast<std::size_t>(d)][static_cast<std::size_t>(c + 1)]));

    const CsvTable eta = read_csv(dir / "labels_eta.csv");
    Eigen::Index draw = 0;
    for (const auto& row : eta.rows) {
        const long it = static_cast<long>(parse_double(row[0]));
        while (draw < D && a.iterations[static_cast<std::size_t>(draw)] < it) ++draw;
        if (draw >= D || a.iterations[static_cast<std::size_t>(draw)] != it)
            throw InputError("labels_eta.csv references an iteration missing from draws_scalar.csv");
        a.eta.push_back({draw, static_cast<Eigen::Index>(parse_double(row[1])) - 1,
                         static_cast<Eigen::Index>(parse_double(row[2])) - 1,
                         static_cast<Eigen::Index>(parse_double(row[3])) - 1, static_cast<int>(parse_double(row[4]))});
    }
    return a;
}

void write_state(const ModelState& state, const fs::path& json_path, const fs::path& xi_csv) {
    json j;
    j["tau"] = state.tau;
    j["g"] = imatrix_to_json(state.g);
    j["eta"] = imatrix_to_json(state.eta);
    j["mu_common"] = vector_to_json(state.mu_common);
    j["s_common"] = vector_to_json(state.s_common);
    j["mu_group"] = matrix_to_json(state.mu_group);
    j["s_group"] = matrix_to_json(state.s_group);
    j["omega"] = matrix_to_json(state.omega);
    for (std::size_t k = 0; k < state.mu_subject.size(); ++k) {
        j["mu_subject"].push_back(matrix_to_json(state.mu_subject[k]));
        j["s_subject"].push_back(matrix_to_json(state.s_subject[k]));
        j["p_star"].push_back(matrix_to_json(state.p_star[k]));
    }
    write_text_atomic(json_path, j.dump(1) + "\n");
    write_matrix_csv(xi_csv, state.xi);
}

ModelState read_state(const fs::path& json_path, const fs::path& xi_csv) {
    std::ifstream in(json_path);
    if (!in) throw InputError("cannot read " + json_path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("malformed state file " + json_path.string() + ": " + e.what());
    }
    ModelState s;
    s.tau = j.at("tau").get<double>();
    s.g = matrix_from_json<Eigen::MatrixXi>(j.at("g"));
    s.eta = matrix_from_json<Eigen::MatrixXi>(j.at("eta"));
    s.mu_common = vector_from_json(j.at("mu_common"));
    s.s_common = vector_from_json(j.at("s_common"));
    s.mu_group = matrix_from_json<Eigen::MatrixXd>(j.at("mu_group"));
    s.s_group = matrix_from_json<Eigen::MatrixXd>(j.at("s_group"));
    s.omega = matrix_from_json<Eigen::MatrixXd>(j.at("omega"));
    for (const auto& m : j.at("mu_subject")) s.mu_subject.push_back(matrix_from_json<Eigen::MatrixXd>(m));
    for (const auto& m : j.at("s_subject")) s.s_subject.push_back(matrix_from_json<Eigen::MatrixXd>(m));
    for (const auto& m : j.at("p_star")) {
        s.p_star.push_back(matrix_from_json<Eigen::MatrixXd>(m));
        Eigen::MatrixXd p(s.p_star.back().rows(), s.p_star.back().cols());
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            p.row(r) = sticks_to_weights(s.p_star.back().row(r).transpose()).transpose();
        s.p.push_back(p);
    }
    s.xi = read_matrix_csv(xi_csv);
    return s;
}

void write_checkpoint(const fs::path& dir, const Checkpoint& cp, const ModelState& state, const ChainArchive& archive) {
    fs::create_directories(dir / "checkpoint_draws");
    write_chain_archive(archive, dir / "checkpoint_draws");
    write_state(state, dir / "checkpoint_state.json", dir / "checkpoint_xi.csv");
    json j;
    j["next_iteration"] = cp.next_iteration;
    j["rng_state"] = cp.rng_state;
    j["ssr"] = cp.ssr;
    j["subjects"] = archive.subjects;
    j["channels"] = archive.channels;
    j["components"] = archive.components;
    // Written last: its presence marks a complete checkpoint.
    write_text_atomic(dir / "checkpoint.json", j.dump(1) + "\n");
}

bool has_checkpoint(const fs::path& dir) { return fs::exists(dir / "checkpoint.json"); }

Checkpoint read_checkpoint(const fs::path& dir, ModelState& state, ChainArchive& archive) {
    std::ifstream in(dir / "checkpoint.json");
    if (!in) throw InputError("cannot read checkpoint in " + dir.string());
    const json j = json::parse(in);
    Checkpoint cp;
    cp.next_iteration = j.at("next_iteration").get<long>();
    cp.rng_state = j.at("rng_state").get<std::string>();
    cp.ssr = j.at("ssr").get<double>();
    state = read_state(dir / "checkpoint_state.json", dir / "checkpoint_xi.csv");
    archive = read_chain_archive(dir / "checkpoint_draws", j.at("subjects").get<Eigen::Index>(),
                                 j.at("channels").get<Eigen::Index>(), j.at("components").get<Eigen::Index>());
    return cp;
}

}  // namespace mlpp
