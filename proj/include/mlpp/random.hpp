#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace mlpp {

/// Per-chain random stream. Distribution objects are created per draw, so the
/// engine state alone determines every future draw (needed for checkpoints).
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::mt19937_64& engine() { return engine_; }

    double uniform();          // [0, 1)
    double uniform_open();     // (0, 1]
    double normal(double mean, double sd);
    double gamma(double shape, double rate);
    double beta(double a, double b);
    double exponential(double rate);
    Eigen::Index index(Eigen::Index n);

    std::string save() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

/// Dirichlet draw via normalised gammas.
Eigen::VectorXd draw_dirichlet(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& concentration);

/// Gamma(shape, rate) restricted to (lower, inf); shape may be zero when lower > 0.
///
/// Inverse-CDF on the regularised upper incomplete gamma, switching to exponential
/// rejection once the retained tail mass drops under 1e-12.
double draw_truncated_gamma(Rng& rng, double shape, double rate, double lower);

/// Index drawn proportional to exp(log_weights). Throws NumericalError if no weight is finite.
Eigen::Index draw_categorical_log(Rng& rng, std::span<const double> log_weights);

/// log(sum(exp(x))) with the usual max shift; -inf when every term is -inf.
double log_sum_exp(std::span<const double> x);

/// log N(x; mean, 1/precision).
double log_normal_precision(double x, double mean, double precision);

}  // namespace mlpp
