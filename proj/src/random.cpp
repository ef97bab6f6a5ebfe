#include "mlpp/random.hpp"

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mlpp/error.hpp"

namespace mlpp {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x6d6c7070u};
    engine_.seed(seq);
}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform_open() { return 1.0 - uniform(); }

double Rng::normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(engine_); }

double Rng::gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
}

double Rng::beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    if (x + y <= 0) return a >= b ? 1.0 : 0.0;
    return x / (x + y);
}

double Rng::exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }

Eigen::Index Rng::index(Eigen::Index n) {
    return static_cast<Eigen::Index>(std::uniform_int_distribution<long long>(0, n - 1)(engine_));
}

std::string Rng::save() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (!is) throw InputError("corrupt random-engine state");
}

Eigen::VectorXd draw_dirichlet(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& concentration) {
    Eigen::VectorXd out(concentration.size());
    for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = rng.gamma(concentration(j), 1.0);
    const double total = out.sum();
    if (!(total > 0)) {
        // Every gamma underflowed; fall back to the largest concentration.
        out.setZero();
        Eigen::Index arg = 0;
        concentration.maxCoeff(&arg);
        out(arg) = 1.0;
        return out;
    }
    return out / total;
}

namespace {

// Rejection from lower + Exp(proposal_rate); valid once the density is log-concave or decreasing past lower.
double truncated_gamma_tail(Rng& rng, double shape, double rate, double lower) {
    const double a1 = shape - 1.0;
    const double proposal_rate = a1 > 0 ? rate - a1 / lower : rate;
    if (!(proposal_rate > 0)) throw NumericalError("truncated gamma tail proposal has nonpositive rate");
    for (int attempt = 0; attempt < 1'000'000; ++attempt) {
        const double s = lower + rng.exponential(proposal_rate);
        const double log_accept =
            a1 > 0 ? a1 * (std::log(s / lower) - (s - lower) / lower) : a1 * std::log(s / lower);
        if (std::log(rng.uniform_open()) <= log_accept) return s;
    }
    throw NumericalError("truncated gamma rejection sampler failed to accept");
}

// Shape zero: density proportional to exp(-rate s)/s on (lower, inf); CDF tail is E1(rate s).
double truncated_gamma_shape_zero(Rng& rng, double rate, double lower) {
    const double x0 = rate * lower;
    const double tail = boost::math::expint(1, x0);
    if (!(tail > 1e-280)) return truncated_gamma_tail(rng, 0.0, rate, lower);
    const double target = rng.uniform_open() * tail;
    // Bisection on log x for E1(x) = target, E1 decreasing.
    double lo = std::log(x0), hi = lo + 1.0;
    while (boost::math::expint(1, std::exp(hi)) > target) hi += 2.0 * (hi - lo + 1.0);
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (boost::math::expint(1, std::exp(mid)) > target) lo = mid;
        else hi = mid;
    }
    return std::exp(0.5 * (lo + hi)) / rate;
}

}  // namespace

double draw_truncated_gamma(Rng& rng, double shape, double rate, double lower) {
    if (!(rate > 0) || !std::isfinite(rate)) throw NumericalError("truncated gamma requires a positive finite rate");
    if (!(shape >= 0)) throw NumericalError("truncated gamma requires a nonnegative shape");
    lower = std::max(lower, 0.0);
    if (shape == 0.0) {
        if (!(lower > 0)) throw NumericalError("shape-zero gamma is improper without truncation");
        return truncated_gamma_shape_zero(rng, rate, lower);
    }
    const double x0 = rate * lower;
    const double tail = x0 > 0 ? boost::math::gamma_q(shape, x0) : 1.0;
    if (tail < 1e-12) return truncated_gamma_tail(rng, shape, rate, lower);
    const double q = rng.uniform_open() * tail;
    const double x = boost::math::gamma_q_inv(shape, q);
    return std::max(x / rate, lower);
}

double log_sum_exp(std::span<const double> x) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : x) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

Eigen::Index draw_categorical_log(Rng& rng, std::span<const double> log_weights) {
    const double norm = log_sum_exp(log_weights);
    if (!std::isfinite(norm)) throw NumericalError("categorical weights all vanish or are not finite");
    const double u = rng.uniform();
    double acc = 0;
    Eigen::Index last_positive = 0;
    for (std::size_t j = 0; j < log_weights.size(); ++j) {
        const double p = std::exp(log_weights[j] - norm);
        if (p > 0) last_positive = static_cast<Eigen::Index>(j);
        acc += p;
        if (u < acc) return static_cast<Eigen::Index>(j);
    }
    return last_positive;
}

double log_normal_precision(double x, double mean, double precision) {
    const double d = x - mean;
    return 0.5 * std::log(precision / (2.0 * std::numbers::pi)) - 0.5 * precision * d * d;
}

}  // namespace mlpp
