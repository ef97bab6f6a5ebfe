#include "mlpp/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "mlpp/error.hpp"
#include "mlpp/fpca.hpp"
#include "mlpp/model.hpp"

namespace mlpp {

namespace {

void require_same_size(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw DimensionError("partitions cover different numbers of items");
    if (a.empty()) throw DimensionError("partitions must be nonempty");
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

void require_draws(const std::vector<Labels>& draws) {
    if (draws.empty()) throw InputError("no partition draws");
    for (const auto& d : draws)
        if (d.size() != draws.front().size() || d.empty()) throw DimensionError("draws cover different item sets");
}

}  // namespace

Labels canonical_labels(std::span<const int> labels) {
    std::map<int, int> remap;
    Labels out;
    out.reserve(labels.size());
    for (int l : labels) {
        auto [it, fresh] = remap.emplace(l, static_cast<int>(remap.size()));
        out.push_back(it->second);
    }
    return out;
}

int cluster_count(std::span<const int> labels) {
    Labels c = canonical_labels(labels);
    return c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
    return a.size() == b.size() && canonical_labels(a) == canonical_labels(b);
}

Eigen::MatrixXi contingency_table(std::span<const int> a, std::span<const int> b) {
    require_same_size(a, b);
    const Labels ca = canonical_labels(a), cb = canonical_labels(b);
    const int ra = *std::max_element(ca.begin(), ca.end()) + 1;
    const int rb = *std::max_element(cb.begin(), cb.end()) + 1;
    Eigen::MatrixXi t = Eigen::MatrixXi::Zero(ra, rb);
    for (std::size_t i = 0; i < ca.size(); ++i) ++t(ca[i], cb[i]);
    return t;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    const Eigen::MatrixXi t = contingency_table(a, b);
    const double n = static_cast<double>(a.size());
    double index = 0, sum_a = 0, sum_b = 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j) index += choose2(t(i, j));
    for (Eigen::Index i = 0; i < t.rows(); ++i) sum_a += choose2(t.row(i).sum());
    for (Eigen::Index j = 0; j < t.cols(); ++j) sum_b += choose2(t.col(j).sum());
    const double pairs = choose2(n);
    const double expected = pairs > 0 ? sum_a * sum_b / pairs : 0.0;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) return same_partition(a, b) ? 1.0 : 0.0;
    return (index - expected) / (maximum - expected);
}

double variation_of_information(std::span<const int> a, std::span<const int> b) {
    const Eigen::MatrixXi t = contingency_table(a, b);
    const double n = static_cast<double>(a.size());
    const Eigen::VectorXi ra = t.rowwise().sum();
    const Eigen::VectorXi cb = t.colwise().sum().transpose();
    double vi = 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            const double nij = t(i, j);
            if (nij == 0) continue;
            vi += nij / n * (std::log2(ra(i) / nij) + std::log2(cb(j) / nij));
        }
    return std::max(vi, 0.0);
}

Eigen::MatrixXd similarity_matrix(const std::vector<Labels>& draws) {
    require_draws(draws);
    const auto N = static_cast<Eigen::Index>(draws.front().size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(N, N);
    for (const auto& d : draws)
        for (Eigen::Index a = 0; a < N; ++a)
            for (Eigen::Index b = a; b < N; ++b)
                if (d[static_cast<std::size_t>(a)] == d[static_cast<std::size_t>(b)]) s(a, b) += 1.0;
    s /= static_cast<double>(draws.size());
    s.triangularView<Eigen::StrictlyLower>() = s.transpose();
    return s;
}

double expected_vi(std::span<const int> candidate, const std::vector<Labels>& draws, const Eigen::MatrixXd& similarity,
                   ExpectedViMethod method) {
    require_draws(draws);
    if (candidate.size() != draws.front().size()) throw DimensionError("candidate and draws differ in size");
    if (method == ExpectedViMethod::Exact) {
        double total = 0;
        for (const auto& d : draws) total += variation_of_information(candidate, d);
        return total / static_cast<double>(draws.size());
    }
    const auto N = static_cast<Eigen::Index>(candidate.size());
    double total = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
        double same = 0, same_sim = 0, sim = 0;
        for (Eigen::Index j = 0; j < N; ++j) {
            const bool together = candidate[static_cast<std::size_t>(i)] == candidate[static_cast<std::size_t>(j)];
            same += together;
            if (together) same_sim += similarity(i, j);
            sim += similarity(i, j);
        }
        total += std::log2(same) - 2.0 * std::log2(same_sim) + std::log2(sim);
    }
    return total / static_cast<double>(N);
}

PointEstimate vi_point_estimate(const std::vector<Labels>& draws, ExpectedViMethod method) {
    require_draws(draws);
    const Eigen::MatrixXd sim = similarity_matrix(draws);
    PointEstimate best;
    int best_clusters = std::numeric_limits<int>::max();
    double best_loss = std::numeric_limits<double>::infinity();
    std::set<Labels> seen;
    for (std::size_t m = 0; m < draws.size(); ++m) {
        Labels c = canonical_labels(draws[m]);
        if (seen.count(c)) continue;
        const double loss = expected_vi(c, draws, sim, method);
        const int k = cluster_count(c);
        const double tol = 1e-12 * std::max(1.0, std::abs(best_loss));
        if (loss < best_loss - tol || (std::abs(loss - best_loss) <= tol && k < best_clusters)) {
            best = {c, m, loss};
            best_loss = loss;
            best_clusters = k;
        }
        seen.insert(std::move(c));
    }
    best.labels = draws[best.draw_index];
    best.expected_vi = std::max(best.expected_vi, 0.0);
    return best;
}

CredibleBall credible_ball(const std::vector<Labels>& draws, std::span<const int> estimate, double level) {
    require_draws(draws);
    if (estimate.size() != draws.front().size()) throw DimensionError("estimate and draws differ in size");
    if (!(level > 0 && level <= 1)) throw InputError("credible level must lie in (0, 1]");
    const std::size_t M = draws.size();

    // Distinct partitions with their counts and distances.
    struct Entry {
        Labels labels;  // canonical
        Labels raw;     // as first drawn
        std::size_t count = 0;
        double distance = 0;
        int clusters = 0;
    };
    std::vector<Entry> distinct;
    std::map<Labels, std::size_t> position;
    std::vector<double> distances;
    distances.reserve(M);
    for (const auto& d : draws) {
        Labels c = canonical_labels(d);
        auto [it, fresh] = position.emplace(c, distinct.size());
        if (fresh) {
            const double dist = variation_of_information(c, estimate);
            distinct.push_back({c, d, 0, dist, cluster_count(c)});
        }
        Entry& e = distinct[it->second];
        ++e.count;
        distances.push_back(e.distance);
    }
    std::sort(distances.begin(), distances.end());
    const auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(M) - 1e-9));
    const double eps = distances[std::clamp<std::size_t>(rank, 1, M) - 1];

    CredibleBall ball;
    ball.estimate = Labels(estimate.begin(), estimate.end());
    ball.level = level;
    ball.epsilon = eps;
    const Labels ce = canonical_labels(estimate);
    for (const auto& e : distinct)
        if (e.labels == ce) ball.estimate_frequency = static_cast<double>(e.count) / static_cast<double>(M);

    std::vector<const Entry*> inside;
    for (const auto& e : distinct)
        if (e.distance <= eps) inside.push_back(&e);
    auto to_bound = [&](const Entry* e) {
        return BallBound{e->raw, e->clusters, e->distance, static_cast<double>(e->count) / static_cast<double>(M)};
    };
    auto farthest_among = [&](auto keep) {
        std::vector<const Entry*> pool;
        for (const Entry* e : inside)
            if (keep(*e)) pool.push_back(e);
        double far = -1;
        for (const Entry* e : pool) far = std::max(far, e->distance);
        std::vector<BallBound> out;
        for (const Entry* e : pool)
            if (std::abs(e->distance - far) <= 1e-12) out.push_back(to_bound(e));
        return out;
    };
    int fewest = std::numeric_limits<int>::max(), most = 0;
    for (const Entry* e : inside) {
        fewest = std::min(fewest, e->clusters);
        most = std::max(most, e->clusters);
    }
    ball.vertical_upper = farthest_among([&](const Entry& e) { return e.clusters == fewest; });
    ball.vertical_lower = farthest_among([&](const Entry& e) { return e.clusters == most; });
    ball.horizontal = farthest_among([](const Entry&) { return true; });
    return ball;
}

std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weight) {
    // Hungarian algorithm with potentials on the padded square cost matrix -weight.
    const auto rows = static_cast<int>(weight.rows()), cols = static_cast<int>(weight.cols());
    const int n = std::max(rows, cols);
    auto cost = [&](int i, int j) { return (i < rows && j < cols) ? -weight(i, j) : 0.0; };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0), v(static_cast<std::size_t>(n + 1), 0);
    std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(static_cast<std::size_t>(rows), -1);
    for (int j = 1; j <= n; ++j) {
        const int i = p[static_cast<std::size_t>(j)] - 1;
        if (i >= 0 && i < rows && j - 1 < cols) match[static_cast<std::size_t>(i)] = j - 1;
    }
    return match;
}

int classification_error(std::span<const int> truth, std::span<const int> estimate) {
    const Eigen::MatrixXi t = contingency_table(truth, estimate);
    const std::vector<int> match = max_weight_assignment(t.cast<double>());
    int matched = 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        if (match[static_cast<std::size_t>(i)] >= 0) matched += t(i, match[static_cast<std::size_t>(i)]);
    return static_cast<int>(truth.size()) - matched;
}

Labels subject_partition(std::span<const int> g_column, std::span<const int> group_of) {
    if (g_column.size() != group_of.size()) throw DimensionError("one allocation per subject required");
    Labels out(g_column.size());
    for (std::size_t u = 0; u < g_column.size(); ++u) {
        switch (g_column[u]) {
            case 1: out[u] = 1; break;
            case 2: out[u] = group_of[u]; break;
            case 3: out[u] = kFirstSubjectLabel + static_cast<int>(u); break;
            default: throw InputError("subject-level allocation out of range");
        }
    }
    return out;
}

std::vector<Labels> subject_level_draws(const std::vector<ChainArchive>& chains, Eigen::Index k,
                                        std::span<const int> group_of) {
    std::vector<Labels> out;
    for (const auto& a : chains) {
        if (k < 0 || k >= a.components) throw DimensionError("dimension out of range");
        if (static_cast<Eigen::Index>(group_of.size()) != a.subjects) throw DimensionError("group map size mismatch");
        std::vector<int> g(static_cast<std::size_t>(a.subjects));
        for (Eigen::Index d = 0; d < a.draws(); ++d) {
            for (Eigen::Index u = 0; u < a.subjects; ++u) g[static_cast<std::size_t>(u)] = a.g_at(d, u, k);
            out.push_back(subject_partition(g, group_of));
        }
    }
    if (out.empty()) throw InputError("archives hold no draws");
    return out;
}

std::vector<Labels> recording_level_draws(const std::vector<ChainArchive>& chains, Eigen::Index u, Eigen::Index k,
                                          std::span<const int> group_of) {
    std::vector<Labels> out;
    for (const auto& a : chains) {
        if (u < 0 || u >= a.subjects || k < 0 || k >= a.components) throw DimensionError("index out of range");
        const std::size_t base = out.size();
        for (Eigen::Index d = 0; d < a.draws(); ++d) {
            const int gk = a.g_at(d, u, k);
            const int z = gk == 1 ? 1 : group_of[static_cast<std::size_t>(u)];
            out.emplace_back(static_cast<std::size_t>(a.channels), z);
        }
        for (const EtaRecord& e : a.eta)
            if (e.subject == u && e.component == k)
                out[base + static_cast<std::size_t>(e.draw)][static_cast<std::size_t>(e.channel)] = e.label;
    }
    if (out.empty()) throw InputError("archives hold no draws");
    return out;
}

}  // namespace mlpp
