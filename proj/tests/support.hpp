#pragma once

// Oracles and fixtures shared by the unit and acceptance tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mlpp/hyperparams.hpp"
#include "mlpp/model.hpp"
#include "mlpp/partitions.hpp"

namespace mlpp::test {

/// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
inline double kolmogorov_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 1e-3) return 1.0;
    double p = 0;
    for (int j = 1; j <= 200; ++j) {
        const double term = 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

/// One-sample KS p-value of `sample` against a continuous cdf.
inline double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return kolmogorov_pvalue(d, sample.size());
}

/// Every set partition of n items as restricted growth strings.
inline std::vector<Labels> all_partitions(int n) {
    std::vector<Labels> out;
    Labels a(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int max_label) {
        if (i == n) {
            out.push_back(a);
            return;
        }
        for (int l = 0; l <= max_label + 1; ++l) {
            a[static_cast<std::size_t>(i)] = l;
            rec(i + 1, std::max(max_label, l));
        }
    };
    if (n > 0) rec(0, -1);
    return out;
}

/// ARI from explicit pair counting over all item pairs.
inline double brute_ari(const Labels& a, const Labels& b) {
    const std::size_t n = a.size();
    double both = 0, in_a = 0, in_b = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            both += sa && sb;
            in_a += sa;
            in_b += sb;
        }
    const double pairs = static_cast<double>(n * (n - 1) / 2);
    const double expected = pairs > 0 ? in_a * in_b / pairs : 0.0;
    const double max = 0.5 * (in_a + in_b);
    if (max == expected) return same_partition(a, b) ? 1.0 : 0.0;
    return (both - expected) / (max - expected);
}

/// VI in bits from label-frequency maps.
inline double brute_vi(const Labels& a, const Labels& b) {
    const double n = static_cast<double>(a.size());
    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> pab;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1 / n;
        pb[b[i]] += 1 / n;
        pab[{a[i], b[i]}] += 1 / n;
    }
    auto entropy = [](const auto& m) {
        double h = 0;
        for (const auto& [key, p] : m) h -= p * std::log2(p);
        return h;
    };
    return 2 * entropy(pab) - entropy(pa) - entropy(pb);
}

/// Prior constants for small synthetic instances.
inline HyperParams toy_hyperparams(Eigen::Index K, int subject_labels = 3) {
    HyperParams hp;
    hp.h_common_inv = Eigen::VectorXd::Constant(K, 1.0);
    hp.gamma_common = Eigen::VectorXd::Constant(K, 3.0);
    hp.phi_group.resize(K, 2);
    hp.phi_group.col(0).setConstant(1.0);
    hp.phi_group.col(1).setConstant(-1.0);
    hp.h_group_inv = Eigen::MatrixXd::Constant(K, 2, 0.5);
    hp.gamma_group = Eigen::MatrixXd::Constant(K, 2, 2.0);
    hp.phi_subject = Eigen::MatrixXd::Zero(K, 2);
    hp.h_subject_inv = Eigen::MatrixXd::Constant(K, 2, 1.0);
    hp.gamma_subject = Eigen::MatrixXd::Constant(K, 2, 2.0);
    hp.alpha = Eigen::VectorXd::Ones(K);
    hp.subject_labels = subject_labels;
    hp.tau_shape = 3.0;
    hp.tau_rate = 3.0;
    return hp;
}

/// Sampler input with the given group codes and an arbitrary smooth basis; curves start at zero.
inline ModelData toy_model_data(const std::vector<int>& group_of, Eigen::Index channels, Eigen::Index T,
                                Eigen::Index K) {
    ModelData d;
    d.group_of = group_of;
    d.channels = channels;
    d.eigenfunctions.resize(T, K);
    for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index k = 0; k < K; ++k)
            d.eigenfunctions(t, k) = std::sin((k + 1) * 3.141592653589793 * (t + 0.5) / static_cast<double>(T));
    d.centred = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(group_of.size()) * channels, T);
    d.refresh();
    return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("mlpp_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace mlpp::test
