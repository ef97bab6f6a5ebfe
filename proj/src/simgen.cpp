#include "mlpp/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "mlpp/error.hpp"
#include "mlpp/io.hpp"
#include "mlpp/model.hpp"
#include "mlpp/random.hpp"

namespace mlpp {

using nlohmann::json;

std::vector<Eigen::Index> SimDesign::outlier_subjects() const {
    if (!outliers.empty()) return outliers;
    return {0, 1, subjects - 2, subjects - 1};
}

void SimDesign::validate() const {
    if (subjects < 4) throw InputError("simulation needs at least four subjects");
    if (channels < 2) throw InputError("simulation needs at least two channels");
    if (timepoints < 16) throw InputError("simulation needs at least 16 time points");
    if (group_a_size() < 2 || subjects - group_a_size() < 2) throw InputError("each group needs at least two subjects");
    if (!(snr > 0)) throw InputError("snr must be positive");
    if (!(score_sd > 0)) throw InputError("score sd must be positive");
    for (Eigen::Index u : outlier_subjects())
        if (u < 0 || u >= subjects) throw InputError("outlier subject out of range");
}

Eigen::VectorXd simulation_grid(Eigen::Index timepoints) {
    return Eigen::VectorXd::LinSpaced(timepoints, 1.0, static_cast<double>(timepoints));
}

Eigen::MatrixXd make_eigenfunctions(Eigen::Index timepoints) {
    if (timepoints < 16) throw DimensionError("eigenfunctions need at least 16 time points");
    const Eigen::VectorXd t = simulation_grid(timepoints);
    const Eigen::VectorXd w = trapezoid_weights(t);
    Eigen::MatrixXd phi(timepoints, 2);
    for (Eigen::Index i = 0; i < timepoints; ++i) {
        const double x = (t(i) - 1.0) / static_cast<double>(timepoints - 1);
        phi(i, 0) = std::exp(-0.5 * std::pow((x - 0.35) / 0.12, 2));
        phi(i, 1) = std::exp(-0.5 * std::pow((x - 0.3) / 0.08, 2)) - std::exp(-0.5 * std::pow((x - 0.7) / 0.08, 2));
    }
    phi.col(0) /= std::sqrt(inner_product(phi.col(0), phi.col(0), w));
    phi.col(1) -= inner_product(phi.col(1), phi.col(0), w) * phi.col(0);
    phi.col(1) /= std::sqrt(inner_product(phi.col(1), phi.col(1), w));
    return phi;
}

Simulation simulate(const SimDesign& design) {
    design.validate();
    const Eigen::Index U = design.subjects, n = design.channels, T = design.timepoints;
    Rng rng(design.seed, 0);

    Simulation sim;
    FunctionalDataset<double>& d = sim.data;
    GroundTruth& truth = sim.truth;
    d.subjects = U;
    d.channels = n;
    d.time_grid = simulation_grid(T);
    const double unit_scale = std::sqrt(static_cast<double>(T - 1));
    for (Eigen::Index u = 0; u < U; ++u) {
        d.group_of.push_back(u < design.group_a_size() ? kGroupA : kGroupB);
        d.subject_ids.push_back(std::to_string(u + 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) d.channel_ids.push_back(std::to_string(i + 1));

    const std::vector<Eigen::Index> outliers = design.outlier_subjects();
    auto is_outlier = [&](Eigen::Index u) { return std::find(outliers.begin(), outliers.end(), u) != outliers.end(); };

    truth.eigenfunctions = make_eigenfunctions(T);
    truth.scores.resize(U * n, 2);
    truth.allocation.assign(2, std::vector<int>(static_cast<std::size_t>(U), 2));
    for (Eigen::Index u = 0; u < U; ++u) {
        const Eigen::Index c = group_column(d.group_of[static_cast<std::size_t>(u)]);
        for (Eigen::Index k = 0; k < 2; ++k) {
            const double m = design.score_means(c, k);
            const bool planted = k == 1 && is_outlier(u);
            Labels channel_labels(static_cast<std::size_t>(n), 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                double mean = m;
                if (planted && rng.uniform() < 0.5) {
                    mean += (m >= 0 ? 1.0 : -1.0) * design.outlier_offset;
                    channel_labels[static_cast<std::size_t>(i)] = 2;
                }
                truth.scores(u * n + i, k) = unit_scale * rng.normal(mean, design.score_sd);
            }
            if (planted) {
                truth.allocation[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] = 3;
                truth.recording_level.push_back({u, k, channel_labels});
            }
        }
    }
    for (Eigen::Index k = 0; k < 2; ++k)
        truth.subject_level.push_back(subject_partition(truth.allocation[static_cast<std::size_t>(k)], d.group_of));

    truth.noiseless = truth.scores * truth.eigenfunctions.transpose();
    d.values = truth.noiseless;
    if (std::isfinite(design.snr)) {
        const double mean = truth.noiseless.mean();
        const double var = (truth.noiseless.array() - mean).square().mean();
        truth.noise_variance = var / design.snr;
        const double sd = std::sqrt(truth.noise_variance);
        for (Eigen::Index c = 0; c < T; ++c)
            for (Eigen::Index r = 0; r < U * n; ++r) d.values(r, c) += rng.normal(0.0, sd);
    }
    d.validate();
    return sim;
}

void write_truth(const GroundTruth& truth, const SimDesign& design, const std::filesystem::path& path) {
    json j;
    j["design"] = {{"subjects", design.subjects},
                   {"channels", design.channels},
                   {"timepoints", design.timepoints},
                   {"group_a", design.group_a_size()},
                   {"score_means", {{design.score_means(0, 0), design.score_means(0, 1)},
                                    {design.score_means(1, 0), design.score_means(1, 1)}}},
                   {"score_sd", design.score_sd},
                   {"outlier_offset", design.outlier_offset},
                   {"snr", std::isfinite(design.snr) ? json(design.snr) : json("inf")},
                   {"seed", design.seed}};
    json outl = json::array();
    for (Eigen::Index u : design.outlier_subjects()) outl.push_back(u + 1);
    j["design"]["outlier_subjects"] = outl;
    j["noise_variance"] = truth.noise_variance;
    for (std::size_t k = 0; k < truth.subject_level.size(); ++k) {
        j["subject_level"].push_back(truth.subject_level[k]);
        j["allocation"].push_back(truth.allocation[k]);
    }
    j["recording_level"] = json::array();
    for (const auto& r : truth.recording_level)
        j["recording_level"].push_back({{"subject", r.subject + 1}, {"dimension", r.component + 1}, {"labels", r.labels}});
    write_text(path, j.dump(1) + "\n");
}

GroundTruth read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    GroundTruth t;
    try {
        const json j = json::parse(in);
        for (const auto& p : j.at("subject_level")) t.subject_level.push_back(p.get<Labels>());
        for (const auto& a : j.at("allocation")) t.allocation.push_back(a.get<std::vector<int>>());
        for (const auto& r : j.at("recording_level"))
            t.recording_level.push_back({r.at("subject").get<Eigen::Index>() - 1, r.at("dimension").get<Eigen::Index>() - 1,
                                         r.at("labels").get<Labels>()});
        t.noise_variance = j.value("noise_variance", 0.0);
    } catch (const json::exception& e) {
        throw InputError("malformed truth file " + path.string() + ": " + e.what());
    }
    return t;
}

}  // namespace mlpp
