#include "mlpp/hyperparams.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <vector>

#include "mlpp/error.hpp"
#include "mlpp/random.hpp"

namespace mlpp {

namespace {

double sample_mean(std::span<const double> x) {
    double s = 0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
    const double m = sample_mean(x);
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

void require_positive(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* name) {
    if (!(m.array() > 0).all() || !m.allFinite())
        throw InputError(std::string("hyperparameter ") + name + " must be strictly positive");
}

}  // namespace

void HyperParams::validate() const {
    const Eigen::Index K = components();
    if (K < 1) throw InputError("hyperparameters need at least one dimension");
    auto check_group = [&](const Eigen::MatrixXd& m, const char* name) {
        if (m.rows() != K || m.cols() != 2) throw DimensionError(std::string(name) + " must be K x 2");
    };
    check_group(phi_group, "phi_group");
    check_group(h_group_inv, "h_group_inv");
    check_group(gamma_group, "gamma_group");
    check_group(phi_subject, "phi_subject");
    check_group(h_subject_inv, "h_subject_inv");
    check_group(gamma_subject, "gamma_subject");
    if (gamma_common.size() != K || alpha.size() != K) throw DimensionError("per-dimension hyperparameters must have length K");
    require_positive(h_common_inv, "h_common_inv");
    require_positive(gamma_common, "gamma_common");
    require_positive(h_group_inv, "h_group_inv");
    require_positive(gamma_group, "gamma_group");
    require_positive(h_subject_inv, "h_subject_inv");
    require_positive(gamma_subject, "gamma_subject");
    require_positive(delta, "delta");
    require_positive(alpha, "alpha");
    if (!(tau_shape > 0) || !(tau_rate > 0)) throw InputError("tau prior constants must be positive");
    if (subject_labels < 1) throw InputError("subject_labels must be at least 1");
    if (!phi_group.allFinite() || !phi_subject.allFinite()) throw InputError("prior means must be finite");
}

double bootstrap_mean_variance(std::span<const double> sample, Eigen::Index size, int reps, std::uint64_t seed) {
    if (sample.empty() || size < 1 || reps < 2) throw InputError("bootstrap needs data, positive size and >= 2 reps");
    Rng rng(seed);
    const auto n = static_cast<Eigen::Index>(sample.size());
    std::vector<double> means(static_cast<std::size_t>(reps));
    for (auto& m : means) {
        double s = 0;
        for (Eigen::Index j = 0; j < size; ++j) s += sample[static_cast<std::size_t>(rng.index(n))];
        m = s / static_cast<double>(size);
    }
    return sample_sd(means) * sample_sd(means);
}

void rebuild_from_statistics(HyperParams& hp) {
    const ScoreStatistics& st = hp.stats;
    hp.h_common_inv = hp.bootstrap_factor * st.boot_var_all;
    hp.gamma_common = st.sd_all.array().pow(hp.gamma_exponent);
    hp.phi_group = st.mean_group;
    hp.h_group_inv = hp.bootstrap_factor * st.boot_var_group;
    hp.gamma_group = st.sd_group.array().pow(hp.gamma_exponent);
    hp.phi_subject = st.mean_group;
    hp.h_subject_inv = (st.range_group / 2.5).array().square();
    hp.gamma_subject = st.sd_group.array().pow(hp.gamma_exponent);
}

HyperParams estimate_hyperparams(const Eigen::MatrixXd& scores, Eigen::Index channels, std::span<const int> group_of,
                                 const HyperParamOptions& opt) {
    const Eigen::Index K = scores.cols();
    const auto U = static_cast<Eigen::Index>(group_of.size());
    if (K < 1) throw DimensionError("scores need at least one dimension");
    if (channels < 1 || scores.rows() != U * channels) throw DimensionError("scores do not match subjects x channels");
    if (opt.boot_reps < 2) throw InputError("boot_reps must be at least 2");

    HyperParams hp;
    ScoreStatistics& st = hp.stats;
    st.sd_all.resize(K);
    st.boot_var_all.resize(K);
    st.mean_group.resize(K, 2);
    st.sd_group.resize(K, 2);
    st.boot_var_group.resize(K, 2);
    st.range_group.resize(K, 2);

    for (Eigen::Index k = 0; k < K; ++k) {
        std::vector<double> all(scores.col(k).data(), scores.col(k).data() + scores.rows());
        if (all.size() < 2) throw InputError("fewer than 2 scores in dimension " + std::to_string(k + 1));
        st.sd_all(k) = sample_sd(all);
        if (!(st.sd_all(k) > 0)) throw DegenerateError("zero score variance in dimension " + std::to_string(k + 1));
        st.boot_var_all(k) = bootstrap_mean_variance(all, static_cast<Eigen::Index>(all.size()), opt.boot_reps,
                                                     opt.seed * 1'000'003ULL + static_cast<std::uint64_t>(k));
        for (int code : {kGroupA, kGroupB}) {
            std::vector<double> g;
            for (Eigen::Index u = 0; u < U; ++u)
                if (group_of[static_cast<std::size_t>(u)] == code)
                    for (Eigen::Index i = 0; i < channels; ++i) g.push_back(scores(u * channels + i, k));
            const Eigen::Index c = group_column(code);
            if (g.size() < 2)
                throw InputError("fewer than 2 scores for group " + std::to_string(code) + " in dimension " +
                                 std::to_string(k + 1));
            st.mean_group(k, c) = sample_mean(g);
            st.sd_group(k, c) = sample_sd(g);
            if (!(st.sd_group(k, c) > 0))
                throw DegenerateError("zero score variance for group " + std::to_string(code) + " in dimension " +
                                      std::to_string(k + 1));
            const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
            st.range_group(k, c) = *hi - *lo;
            const auto half = static_cast<Eigen::Index>((g.size() + 1) / 2);
            st.boot_var_group(k, c) =
                bootstrap_mean_variance(g, half, opt.boot_reps,
                                        opt.seed * 1'000'003ULL + static_cast<std::uint64_t>(100 * (k + 1) + code));
        }
    }
    rebuild_from_statistics(hp);
    hp.delta = Eigen::Vector3d(9.0 / 20.0, 9.0 / 20.0, 2.0 / 20.0);
    hp.alpha = Eigen::VectorXd::Ones(K);
    hp.tau_shape = opt.tau_shape;
    hp.tau_rate = opt.tau_rate;
    hp.subject_labels = opt.subject_labels;
    hp.validate();
    return hp;
}

Scenario parse_scenario(const std::string& key) {
    std::string k = key;
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (k.size() == 2 && k[0] == 'S' && k[1] >= '1' && k[1] <= '6') return static_cast<Scenario>(k[1] - '0');
    throw InputError("unknown scenario '" + key + "' (expected S1..S6)");
}

HyperParams apply_scenario(HyperParams hp, Scenario scenario) {
    if ((scenario == Scenario::S1 || scenario == Scenario::S2) && hp.stats.sd_all.size() != hp.components())
        throw InputError("scenarios S1 and S2 need the score statistics the priors were built from");
    switch (scenario) {
        case Scenario::S1:
            hp.gamma_exponent = 2.2;
            rebuild_from_statistics(hp);
            break;
        case Scenario::S2:
            hp.bootstrap_factor = 4.0;
            rebuild_from_statistics(hp);
            break;
        case Scenario::S3: hp.delta = Eigen::Vector3d(0.4, 0.4, 0.2); break;
        case Scenario::S4: hp.delta = Eigen::Vector3d::Constant(1.0 / 3.0); break;
        case Scenario::S5: hp.alpha.setConstant(0.5); break;
        case Scenario::S6: hp.alpha.setConstant(2.0); break;
    }
    return hp;
}

namespace {

std::vector<double> parse_list(const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw InputError("");
        } catch (const std::exception&) {
            throw InputError("cannot parse number '" + item + "' in override");
        }
    }
    if (out.empty()) throw InputError("override value is empty");
    return out;
}

// "name[1,2]" -> name, {1, 2}
std::pair<std::string, std::vector<int>> parse_key(const std::string& key) {
    const auto open = key.find('[');
    if (open == std::string::npos) return {key, {}};
    if (key.back() != ']') throw InputError("malformed override key '" + key + "'");
    std::vector<int> idx;
    for (double v : parse_list(key.substr(open + 1, key.size() - open - 2))) idx.push_back(static_cast<int>(v));
    return {key.substr(0, open), idx};
}

void patch_vector(Eigen::VectorXd& v, const std::vector<int>& idx, const std::vector<double>& vals, const std::string& key) {
    if (idx.empty()) {
        if (vals.size() == 1) v.setConstant(vals[0]);
        else if (static_cast<Eigen::Index>(vals.size()) == v.size())
            v = Eigen::Map<const Eigen::VectorXd>(vals.data(), v.size());
        else throw InputError("override '" + key + "' has the wrong number of values");
        return;
    }
    if (idx.size() != 1 || idx[0] < 1 || idx[0] > v.size() || vals.size() != 1)
        throw InputError("override '" + key + "' index out of range");
    v(idx[0] - 1) = vals[0];
}

void patch_group(Eigen::MatrixXd& m, const std::vector<int>& idx, const std::vector<double>& vals, const std::string& key) {
    if (idx.empty() && vals.size() == 1) {
        m.setConstant(vals[0]);
        return;
    }
    if (idx.size() != 2 || idx[0] < 1 || idx[0] > m.rows() || (idx[1] != kGroupA && idx[1] != kGroupB) ||
        vals.size() != 1)
        throw InputError("override '" + key + "' needs [k,D] with 1 <= k <= K and D in {2,3}");
    m(idx[0] - 1, group_column(idx[1])) = vals[0];
}

}  // namespace

HyperParams apply_overrides(HyperParams hp, const std::map<std::string, std::string>& overrides) {
    for (const auto& [key, value] : overrides) {
        const auto [name, idx] = parse_key(key);
        const std::vector<double> vals = parse_list(value);
        if (name == "delta") {
            if (vals.size() != 3 || !idx.empty()) throw InputError("delta override needs exactly three values");
            hp.delta = Eigen::Vector3d(vals[0], vals[1], vals[2]);
        } else if (name == "alpha") patch_vector(hp.alpha, idx, vals, key);
        else if (name == "h_common_inv") patch_vector(hp.h_common_inv, idx, vals, key);
        else if (name == "gamma_common") patch_vector(hp.gamma_common, idx, vals, key);
        else if (name == "phi_group") patch_group(hp.phi_group, idx, vals, key);
        else if (name == "h_group_inv") patch_group(hp.h_group_inv, idx, vals, key);
        else if (name == "gamma_group") patch_group(hp.gamma_group, idx, vals, key);
        else if (name == "phi_subject") patch_group(hp.phi_subject, idx, vals, key);
        else if (name == "h_subject_inv") patch_group(hp.h_subject_inv, idx, vals, key);
        else if (name == "gamma_subject") patch_group(hp.gamma_subject, idx, vals, key);
        else if (name == "tau_shape" && vals.size() == 1) hp.tau_shape = vals[0];
        else if (name == "tau_rate" && vals.size() == 1) hp.tau_rate = vals[0];
        else if (name == "subject_labels" && vals.size() == 1) hp.subject_labels = static_cast<int>(vals[0]);
        else throw InputError("unknown hyperparameter override '" + key + "'");
    }
    hp.validate();
    return hp;
}

}  // namespace mlpp
