#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "mlpp/error.hpp"

// Chain inputs are matrices with one column per chain and one row per retained draw.

namespace mlpp {

/// Split potential scale reduction factor. Each chain is halved (the middle draw of an odd
/// chain is dropped); returns 1 when every draw is identical and +inf when only the chain
/// means differ.
template <typename Derived>
double split_rhat(const Eigen::MatrixBase<Derived>& draws) {
    const Eigen::Index N = draws.rows(), M = draws.cols();
    if (M < 1 || N < 4) throw DimensionError("split R-hat needs chains of at least four draws");
    if (!draws.allFinite()) throw NumericalError("split R-hat: non-finite draw");
    const Eigen::Index half = N / 2;
    Eigen::MatrixXd split(half, 2 * M);
    for (Eigen::Index c = 0; c < M; ++c) {
        split.col(2 * c) = draws.col(c).head(half).template cast<double>();
        split.col(2 * c + 1) = draws.col(c).tail(half).template cast<double>();
    }
    const double n = static_cast<double>(half);
    const Eigen::RowVectorXd means = split.colwise().mean();
    const double W = (split.rowwise() - means).colwise().squaredNorm().mean() / (n - 1.0);
    const double B = n * (means.array() - means.mean()).square().sum() / static_cast<double>(split.cols() - 1);
    if (W == 0) return B == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

struct EssResult {
    double ess = 0;
    bool degenerate = false;  // every draw identical; ess is then the draw count by convention
};

/// Multi-chain effective sample size with direct autocovariances and Geyer's initial positive
/// sequence (pairs summed until the first nonpositive pair, then made monotone).
template <typename Derived>
EssResult effective_sample_size(const Eigen::MatrixBase<Derived>& draws) {
    const Eigen::Index N = draws.rows(), M = draws.cols();
    if (M < 1 || N < 8) throw DimensionError("ESS needs at least eight draws per chain");
    if (!draws.allFinite()) throw NumericalError("ESS: non-finite draw");
    const Eigen::MatrixXd x = draws.template cast<double>();
    const Eigen::RowVectorXd means = x.colwise().mean();
    const Eigen::MatrixXd centred = x.rowwise() - means;
    const double n = static_cast<double>(N);
    const double total = n * static_cast<double>(M);

    auto mean_acov = [&](Eigen::Index lag) {
        double s = 0;
        for (Eigen::Index c = 0; c < M; ++c)
            s += centred.col(c).head(N - lag).dot(centred.col(c).tail(N - lag)) / n;
        return s / static_cast<double>(M);
    };
    const double acov0 = mean_acov(0);
    const double W = acov0 * n / (n - 1.0);
    const double B = M > 1 ? n * (means.array() - means.mean()).square().sum() / static_cast<double>(M - 1) : 0.0;
    const double var_plus = (n - 1.0) / n * W + B / n;
    if (!(W > 0) || !(var_plus > 0)) return {total, true};

    auto rho = [&](Eigen::Index lag) { return 1.0 - (W - mean_acov(lag)) / var_plus; };
    double sum = 0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t + 1 < N; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (!(pair > 0)) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        sum += pair;
    }
    // tau = -1 + 2 * sum of pairs (pair 0 includes rho_0 = 1).
    const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(total));
    return {total / tau, false};
}

/// One row of the long-format trace table.
struct TraceRow {
    long iteration = 0;
    int chain = 0;
    double value = 0;
};

template <typename Derived>
std::vector<TraceRow> trace_table(const Eigen::MatrixBase<Derived>& draws, const std::vector<long>& iterations = {}) {
    std::vector<TraceRow> rows;
    rows.reserve(static_cast<std::size_t>(draws.size()));
    for (Eigen::Index c = 0; c < draws.cols(); ++c)
        for (Eigen::Index t = 0; t < draws.rows(); ++t)
            rows.push_back({iterations.empty() ? static_cast<long>(t + 1) : iterations[static_cast<std::size_t>(t)],
                            static_cast<int>(c + 1), static_cast<double>(draws(t, c))});
    return rows;
}

struct Histogram {
    Eigen::VectorXd edges;   // bins + 1
    Eigen::MatrixXi counts;  // bins x chains
};

/// Per-chain histogram on a common equal-width grid spanning all draws.
template <typename Derived>
Histogram histogram(const Eigen::MatrixBase<Derived>& draws, int bins) {
    if (bins < 1) throw InputError("histogram needs at least one bin");
    if (draws.size() == 0) throw DimensionError("histogram of no draws");
    double lo = static_cast<double>(draws.minCoeff()), hi = static_cast<double>(draws.maxCoeff());
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges = Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
    h.counts = Eigen::MatrixXi::Zero(bins, draws.cols());
    const double width = (hi - lo) / bins;
    for (Eigen::Index c = 0; c < draws.cols(); ++c)
        for (Eigen::Index t = 0; t < draws.rows(); ++t) {
            auto b = static_cast<Eigen::Index>((static_cast<double>(draws(t, c)) - lo) / width);
            h.counts(std::clamp<Eigen::Index>(b, 0, bins - 1), c) += 1;
        }
    return h;
}

struct Density {
    Eigen::VectorXd grid;
    Eigen::MatrixXd density;  // grid x chains
    Eigen::VectorXd bandwidth;
};

/// Gaussian kernel density per chain with Silverman's bandwidth, on a grid reaching four
/// bandwidths past the pooled range.
template <typename Derived>
Density kernel_density(const Eigen::MatrixBase<Derived>& draws, int points = 512) {
    if (points < 2) throw InputError("density grid needs at least two points");
    const Eigen::Index N = draws.rows(), M = draws.cols();
    if (N < 2) throw DimensionError("density needs at least two draws per chain");
    Density d;
    d.bandwidth.resize(M);
    for (Eigen::Index c = 0; c < M; ++c) {
        std::vector<double> v(static_cast<std::size_t>(N));
        for (Eigen::Index t = 0; t < N; ++t) v[static_cast<std::size_t>(t)] = static_cast<double>(draws(t, c));
        std::sort(v.begin(), v.end());
        auto quantile = [&](double p) {
            const double pos = p * static_cast<double>(N - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, v.size() - 1);
            return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
        };
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(N);
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / static_cast<double>(N - 1));
        const double iqr = quantile(0.75) - quantile(0.25);
        double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
        if (!(spread > 0)) spread = std::max(std::abs(mean), 1.0) * 1e-3;
        d.bandwidth(c) = 0.9 * spread * std::pow(static_cast<double>(N), -0.2);
    }
    const double reach = 4.0 * d.bandwidth.maxCoeff();
    d.grid = Eigen::VectorXd::LinSpaced(points, static_cast<double>(draws.minCoeff()) - reach,
                                        static_cast<double>(draws.maxCoeff()) + reach);
    d.density = Eigen::MatrixXd::Zero(points, M);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (Eigen::Index c = 0; c < M; ++c) {
        const double h = d.bandwidth(c);
        for (Eigen::Index g = 0; g < points; ++g) {
            double s = 0;
            for (Eigen::Index t = 0; t < N; ++t) {
                const double z = (d.grid(g) - static_cast<double>(draws(t, c))) / h;
                s += std::exp(-0.5 * z * z);
            }
            d.density(g, c) = s * norm / (h * static_cast<double>(N));
        }
    }
    return d;
}

}  // namespace mlpp
