#include "mlpp/model.hpp"

#include <cmath>
#include <numbers>

#include "mlpp/error.hpp"
#include "mlpp/random.hpp"

namespace mlpp {

void ModelData::refresh() {
    projections = centred * eigenfunctions;
    gram = eigenfunctions.transpose() * eigenfunctions;
    centred_sq_norm = centred.squaredNorm();
}

ModelData make_model_data(const FunctionalDataset<double>& data, const EigenBasis<double>& basis) {
    data.validate();
    if (basis.mean_curve.size() != data.timepoints() || basis.eigenfunctions.rows() != data.timepoints())
        throw DimensionError("basis and dataset disagree on the number of time points");
    ModelData out;
    out.centred = data.values.rowwise() - basis.mean_curve.transpose();
    out.eigenfunctions = basis.eigenfunctions;
    out.group_of = data.group_of;
    out.channels = data.channels;
    out.initial_scores = basis.scores;
    out.refresh();
    return out;
}

ModelState ModelState::zeros(Eigen::Index subjects, Eigen::Index channels, Eigen::Index components, int subject_labels) {
    ModelState s;
    const Eigen::Index N = subjects * channels;
    s.xi = Eigen::MatrixXd::Zero(N, components);
    s.g = Eigen::MatrixXi::Constant(subjects, components, 1);
    s.eta = Eigen::MatrixXi::Constant(N, components, kFirstSubjectLabel);
    s.mu_common = Eigen::VectorXd::Zero(components);
    s.s_common = Eigen::VectorXd::Ones(components);
    s.mu_group = Eigen::MatrixXd::Zero(components, 2);
    s.s_group = Eigen::MatrixXd::Ones(components, 2);
    s.omega = Eigen::MatrixXd::Constant(components, 3, 1.0 / 3.0);
    for (Eigen::Index k = 0; k < components; ++k) {
        s.mu_subject.push_back(Eigen::MatrixXd::Zero(subjects, subject_labels));
        s.s_subject.push_back(Eigen::MatrixXd::Ones(subjects, subject_labels));
        s.p_star.push_back(Eigen::MatrixXd::Constant(2, subject_labels, 0.5));
        Eigen::MatrixXd p(2, subject_labels);
        const Eigen::VectorXd w = sticks_to_weights(Eigen::VectorXd::Constant(subject_labels, 0.5));
        p.row(0) = w.transpose();
        p.row(1) = w.transpose();
        s.p.push_back(p);
    }
    return s;
}

void ModelState::validate(std::span<const int> group_of) const {
    const Eigen::Index U = subjects(), K = components();
    const int J = subject_labels();
    if (static_cast<Eigen::Index>(group_of.size()) != U) throw DimensionError("state and groups disagree on subjects");
    if (!(tau > 0) || !std::isfinite(tau)) throw InputError("tau must be positive and finite");
    if ((g.array() < 1).any() || (g.array() > 3).any()) throw InputError("g labels must lie in {1,2,3}");
    if ((eta.array() < kFirstSubjectLabel).any() || (eta.array() > 3 + J).any())
        throw InputError("eta labels out of range");
    if (!(s_common.array() > 0).all() || !(s_group.array() > 0).all()) throw InputError("precisions must be positive");
    for (Eigen::Index k = 0; k < K; ++k) {
        if (!(s_subject[static_cast<std::size_t>(k)].array() > 0).all()) throw InputError("precisions must be positive");
        if (std::abs(omega.row(k).sum() - 1.0) > 1e-12 || (omega.row(k).array() < 0).any())
            throw InputError("omega rows must be simplex vectors");
        const auto& pk = p[static_cast<std::size_t>(k)];
        for (Eigen::Index d = 0; d < 2; ++d)
            if (std::abs(pk.row(d).sum() - 1.0) > 1e-12 || (pk.row(d).array() < 0).any())
                throw InputError("stick weights must be simplex vectors");
    }
}

Eigen::MatrixXi derive_z(const Eigen::MatrixXi& g, const Eigen::MatrixXi& eta, std::span<const int> group_of,
                         int subject_labels) {
    const Eigen::Index U = g.rows(), K = g.cols();
    if (U == 0 || eta.rows() % U != 0 || eta.cols() != K) throw DimensionError("derive_z: shape mismatch");
    if (static_cast<Eigen::Index>(group_of.size()) != U) throw DimensionError("derive_z: one group per subject");
    const Eigen::Index n = eta.rows() / U;
    Eigen::MatrixXi z(eta.rows(), K);
    for (Eigen::Index u = 0; u < U; ++u) {
        const int D = group_of[static_cast<std::size_t>(u)];
        if (D != kGroupA && D != kGroupB) throw InputError("derive_z: group codes must be 2 or 3");
        for (Eigen::Index k = 0; k < K; ++k) {
            const int gk = g(u, k);
            if (gk < 1 || gk > 3) throw InputError("derive_z: g out of range");
            for (Eigen::Index i = 0; i < n; ++i) {
                const int e = eta(u * n + i, k);
                if (e < kFirstSubjectLabel || e > 3 + subject_labels) throw InputError("derive_z: eta out of range");
                // Indicator form: c1 * 1 + c2 * D + c3 * eta.
                const int c1 = gk == 1, c2 = gk == 2, c3 = gk == 3;
                z(u * n + i, k) = c1 * 1 + c2 * D + c3 * e;
            }
        }
    }
    return z;
}

ClusterParams cluster_for_label(const ModelState& state, Eigen::Index u, Eigen::Index k, int z) {
    if (z == 1) return {state.mu_common(k), state.s_common(k)};
    if (z == kGroupA || z == kGroupB) {
        const Eigen::Index c = group_column(z);
        return {state.mu_group(k, c), state.s_group(k, c)};
    }
    const Eigen::Index j = z - kFirstSubjectLabel;
    const auto kk = static_cast<std::size_t>(k);
    return {state.mu_subject[kk](u, j), state.s_subject[kk](u, j)};
}

ClusterParams cluster_of(const ModelState& state, std::span<const int> group_of, Eigen::Index u, Eigen::Index i,
                         Eigen::Index k) {
    const Eigen::Index n = state.channels();
    switch (state.g(u, k)) {
        case 1: return cluster_for_label(state, u, k, 1);
        case 2: return cluster_for_label(state, u, k, group_of[static_cast<std::size_t>(u)]);
        default: return cluster_for_label(state, u, k, state.eta(u * n + i, k));
    }
}

Eigen::VectorXd sticks_to_weights(const Eigen::Ref<const Eigen::VectorXd>& p_star) {
    const Eigen::Index J = p_star.size();
    if (J < 1) throw DimensionError("sticks_to_weights: empty stick vector");
    Eigen::VectorXd w(J);
    double remaining = 1.0;
    for (Eigen::Index j = 0; j < J; ++j) {
        const double v = p_star(j);
        if (!(v > 0 && v < 1)) throw InputError("stick proportions must lie in (0, 1)");
        w(j) = v * remaining;
        remaining *= 1.0 - v;
    }
    return w / w.sum();
}

double residual_sum_squares(const ModelState& state, const ModelData& data) {
    return (data.centred - state.xi * data.eigenfunctions.transpose()).squaredNorm();
}

double loglik_from_ssr(double ssr, double tau, Eigen::Index observations) {
    if (!(tau > 0)) throw InputError("tau must be positive");
    const double m = static_cast<double>(observations);
    return 0.5 * m * std::log(tau / (2.0 * std::numbers::pi)) - 0.5 * tau * ssr;
}

double loglik_data(const ModelState& state, const ModelData& data) {
    if (state.xi.rows() != data.centred.rows() || state.xi.cols() != data.components())
        throw DimensionError("state and data disagree on shape");
    return loglik_from_ssr(residual_sum_squares(state, data), state.tau, data.centred.size());
}

double logprior_scores(const ModelState& state, std::span<const int> group_of) {
    const Eigen::Index U = state.subjects(), K = state.components(), n = state.channels();
    double total = 0;
    for (Eigen::Index u = 0; u < U; ++u)
        for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index i = 0; i < n; ++i) {
                const ClusterParams c = cluster_of(state, group_of, u, i, k);
                if (!(c.precision > 0)) throw InputError("allocated cluster has nonpositive precision");
                total += log_normal_precision(state.xi(u * n + i, k), c.mean, c.precision);
            }
    return total;
}

}  // namespace mlpp
