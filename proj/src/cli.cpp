#include "mlpp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlpp/diagnostics.hpp"
#include "mlpp/error.hpp"
#include "mlpp/io.hpp"
#include "mlpp/pipeline.hpp"

namespace mlpp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

void prepare_output(const fs::path& out, bool force, bool resume) {
    if (out.empty()) throw InputError("--out is required");
    if (fs::exists(out) && !fs::is_directory(out)) throw InputError(out.string() + " exists and is not a directory");
    const bool occupied = fs::exists(out) && !fs::is_empty(out);
    if (occupied && resume) return;
    if (occupied && !force) throw InputError(out.string() + " is not empty; pass --force to overwrite");
    if (occupied) fs::remove_all(out);
    fs::create_directories(out);
}

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) throw InputError(std::string(what) + " is required");
    if (!fs::is_regular_file(p)) throw InputError(std::string(what) + " not found: " + p.string());
}

json read_json_file(const fs::path& p) {
    const std::string text = read_text(p);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

template <typename Work>
void run_parallel(int tasks, int workers, Work work) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(tasks));
    std::atomic<int> next{0};
    auto loop = [&] {
        for (int t = next++; t < tasks; t = next++) {
            try {
                work(t);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };
    const int n = std::clamp(workers, 1, std::max(tasks, 1));
    if (n == 1) {
        loop();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n; ++w) pool.emplace_back(loop);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string replicate_name(int r) {
    std::ostringstream ss;
    ss << "replicate_" << std::setw(3) << std::setfill('0') << r;
    return ss.str();
}

struct RunInfo {
    Eigen::Index subjects = 0, channels = 0, components = 0;
    int chains = 0;
    std::vector<int> group_of;
};

RunInfo read_run_info(const fs::path& run) {
    if (!fs::is_regular_file(run / "meta.json")) throw InputError("no meta.json in " + run.string() + "; not a run directory");
    const json meta = read_json_file(run / "meta.json");
    RunInfo info;
    try {
        info.subjects = meta.at("subjects").get<Eigen::Index>();
        info.channels = meta.at("channels").get<Eigen::Index>();
        info.components = meta.at("components").get<Eigen::Index>();
        info.chains = meta.at("sampler").at("chains").get<int>();
        info.group_of = meta.at("group_of").get<std::vector<int>>();
        if (meta.value("status", "") != "complete") throw InputError("run in " + run.string() + " did not complete");
    } catch (const json::exception& e) {
        throw InputError("meta.json: " + std::string(e.what()));
    }
    return info;
}

std::vector<ChainArchive> read_run_chains(const fs::path& run, const RunInfo& info) {
    std::vector<ChainArchive> chains;
    for (int c = 1; c <= info.chains; ++c)
        chains.push_back(read_chain_archive(run / ("chain_" + std::to_string(c)), info.subjects, info.channels,
                                            info.components));
    return chains;
}

bool monitored(const std::string& name) {
    for (const char* prefix : {"omega_", "mu_common_", "s_common_", "mu_group_", "s_group_"})
        if (name.rfind(prefix, 0) == 0) return true;
    return name == "tau";
}

// "1-3,7" style list of 1-based items.
std::string item_ranges(const std::vector<int>& items) {
    std::string out;
    for (std::size_t a = 0; a < items.size();) {
        std::size_t b = a;
        while (b + 1 < items.size() && items[b + 1] == items[b] + 1) ++b;
        if (!out.empty()) out += ',';
        out += std::to_string(items[a]);
        if (b > a) out += (b == a + 1 ? "," : "-") + std::to_string(items[b]);
        a = b + 1;
    }
    return out;
}

// Clusters in order of first appearance; subject-level labels carry their kind.
std::string describe_partition(const Labels& labels, bool subject_level) {
    std::vector<int> order;
    for (int l : labels)
        if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
    std::string out;
    std::vector<int> singles;
    int index = 0;
    for (int l : order) {
        ++index;
        std::vector<int> items;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == l) items.push_back(static_cast<int>(i) + 1);
        if (subject_level && l >= kFirstSubjectLabel) {
            singles.insert(singles.end(), items.begin(), items.end());
            continue;
        }
        std::string tag;
        if (subject_level) tag = l == 1 ? "common" : l == kGroupA ? "groupA" : "groupB";
        else tag = "c" + std::to_string(index);
        out += (out.empty() ? "" : " ") + tag + "{" + item_ranges(items) + "}";
    }
    if (!singles.empty()) {
        std::sort(singles.begin(), singles.end());
        out += (out.empty() ? "" : " ") + std::string("subject{") + item_ranges(singles) + "}";
    }
    return out;
}

json bound_json(const BallBound& b) {
    return {{"labels", b.labels}, {"clusters", b.clusters}, {"distance", b.distance}, {"frequency", b.frequency}};
}

json ball_json(const CredibleBall& ball) {
    json j{{"level", ball.level}, {"epsilon", ball.epsilon}, {"estimate_frequency", ball.estimate_frequency}};
    for (const char* key : {"vertical_upper", "vertical_lower", "horizontal"}) j[key] = json::array();
    for (const auto& b : ball.vertical_upper) j["vertical_upper"].push_back(bound_json(b));
    for (const auto& b : ball.vertical_lower) j["vertical_lower"].push_back(bound_json(b));
    for (const auto& b : ball.horizontal) j["horizontal"].push_back(bound_json(b));
    return j;
}

std::string percent(double f) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << 100.0 * f << '%';
    return ss.str();
}

void table_rows(std::ostream& out, const CredibleBall& ball, const Labels& estimate, bool subject_level) {
    out << "  " << std::left << std::setw(18) << "point estimate" << std::setw(9) << percent(ball.estimate_frequency)
        << describe_partition(estimate, subject_level) << '\n';
    auto rows = [&](const char* name, const std::vector<BallBound>& bounds) {
        for (const auto& b : bounds)
            out << "  " << std::left << std::setw(18) << name << std::setw(9) << percent(b.frequency)
                << describe_partition(b.labels, subject_level) << '\n';
    };
    rows("vertical upper", ball.vertical_upper);
    rows("vertical lower", ball.vertical_lower);
    rows("horizontal", ball.horizontal);
}

}  // namespace

int worker_count(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* cap = std::getenv("MLPP_THREADS")) {
        const int c = std::atoi(cap);
        if (c > 0) n = std::min(n, c);
    }
    return std::max(n, 1);
}

void cmd_simulate(const SimulateArgs& args) {
    if (args.replicates < 1) throw InputError("--replicates must be positive");
    args.design.validate();
    prepare_output(args.out, args.force, false);
    json meta{{"version", kVersion}, {"command", "simulate"}, {"replicates", args.replicates}, {"seed", args.design.seed}};
    std::vector<std::uint64_t> seeds;
    for (int r = 1; r <= args.replicates; ++r) seeds.push_back(args.design.seed * 1000003ULL + static_cast<std::uint64_t>(r));
    meta["replicate_seeds"] = seeds;
    run_parallel(args.replicates, worker_count(0), [&](int t) {
        SimDesign design = args.design;
        design.seed = seeds[static_cast<std::size_t>(t)];
        const Simulation sim = simulate(design);
        const fs::path dir = args.out / replicate_name(t + 1);
        fs::create_directories(dir);
        write_dataset(sim.data, dir / "data.csv", dir / "time.csv");
        write_truth(sim.truth, design, dir / "truth.json");
        write_matrix_csv(dir / "true_scores.csv", sim.truth.scores, {"xi_1", "xi_2"});
        write_basis(basis_from_eigenfunctions(sim.data, sim.truth.eigenfunctions), dir / "basis");
    });
    write_text(args.out / "meta.json", meta.dump(2) + "\n");
}

void cmd_fit(const FitArgs& args) {
    require_file(args.data, "--data");
    require_file(args.time, "--time");
    if (!args.hyperparams.empty()) require_file(args.hyperparams, "--hyperparams");
    if (!args.basis.empty()) require_file(args.basis / "eigenfunctions.csv", "--basis eigenfunctions.csv");
    if (args.init != "empirical" && args.init != "prior") throw InputError("--init must be 'empirical' or 'prior'");

    SamplerConfig cfg;
    cfg.n_iter = args.iters;
    cfg.burn_in = args.burnin;
    cfg.thin = args.thin;
    cfg.n_chains = args.chains;
    cfg.seed = args.seed;
    cfg.init_mode = args.init == "prior" ? InitMode::PriorDraw : InitMode::Empirical;
    cfg.audit_every = args.audit_every;
    cfg.checkpoint_every = args.checkpoint_every;
    cfg.validate();

    PipelineOptions opt;
    opt.smooth = !args.no_smooth;
    opt.smoothing.basis_size = args.basis_size;
    opt.smoothing.penalty = args.penalty;
    opt.fpca = {args.var_threshold, args.min_share};
    if (!args.basis.empty()) opt.eigenfunctions = read_matrix_csv(args.basis / "eigenfunctions.csv");
    opt.hyper.boot_reps = args.boot_reps;
    opt.hyper.seed = args.seed;
    opt.hyper.subject_labels = args.subject_labels;
    if (!args.hyperparams.empty()) opt.preset = read_hyperparams(args.hyperparams);
    if (!args.scenario.empty()) opt.scenario = parse_scenario(args.scenario);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + kv + "'");
        opt.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }

    const FunctionalDataset<double> raw = read_dataset(args.data, args.time);
    const PreparedFit fit = prepare_fit(raw, opt);
    prepare_output(args.out, args.force, args.resume);

    json meta;
    meta["version"] = kVersion;
    meta["command"] = "fit";
    meta["status"] = "running";
    meta["inputs"] = {{"data", args.data.string()},
                      {"data_hash", file_hash(args.data)},
                      {"time", args.time.string()},
                      {"time_hash", file_hash(args.time)}};
    if (!args.hyperparams.empty()) meta["inputs"]["hyperparams_hash"] = file_hash(args.hyperparams);
    if (!args.basis.empty()) meta["inputs"]["basis_hash"] = file_hash(args.basis / "eigenfunctions.csv");
    meta["sampler"] = {{"iters", cfg.n_iter},     {"burnin", cfg.burn_in},
                       {"thin", cfg.thin},        {"chains", cfg.n_chains},
                       {"seed", cfg.seed},        {"init", args.init},
                       {"audit_every", cfg.audit_every}, {"checkpoint_every", cfg.checkpoint_every},
                       {"draws_per_chain", cfg.draws_per_chain()}};
    meta["preprocessing"] = {{"smooth", opt.smooth},
                             {"basis_size", args.basis_size},
                             {"penalty", fit.smoothing_penalty ? json(*fit.smoothing_penalty) : json(nullptr)},
                             {"fixed_basis", !args.basis.empty()},
                             {"var_threshold", args.var_threshold},
                             {"min_component_share", args.min_share}};
    meta["hyperparameters"] = {{"scenario", args.scenario},
                               {"overrides", opt.overrides},
                               {"boot_reps", args.boot_reps},
                               {"subject_labels", fit.hyper.subject_labels}};
    meta["subjects"] = fit.model.subjects();
    meta["channels"] = fit.model.channels;
    meta["components"] = fit.model.components();
    meta["timepoints"] = fit.model.timepoints();
    meta["group_of"] = fit.model.group_of;
    meta["subject_ids"] = raw.subject_ids;
    meta["channel_ids"] = raw.channel_ids;
    write_text(args.out / "meta.json", meta.dump(2) + "\n");
    write_basis(fit.basis, args.out / "basis");
    write_hyperparams(fit.hyper, args.out / "hyperparams.json");
    meta["hyperparams_hash"] = file_hash(args.out / "hyperparams.json");

    const std::vector<ChainArchive> chains =
        run_chains(fit.model, fit.hyper, cfg, worker_count(args.workers), args.out, args.resume);
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const fs::path dir = args.out / ("chain_" + std::to_string(c + 1));
        write_chain_archive(chains[c], dir);
        fs::remove_all(dir / "checkpoint_draws");
        for (const char* f : {"checkpoint.json", "checkpoint_state.json", "checkpoint_xi.csv"}) fs::remove(dir / f);
    }
    meta["status"] = "complete";
    write_text(args.out / "meta.json", meta.dump(2) + "\n");
}

int cmd_diagnose(const DiagnoseArgs& args) {
    const RunInfo info = read_run_info(args.run);
    const std::vector<ChainArchive> chains = read_run_chains(args.run, info);
    if (chains.empty()) throw InputError("run has no chains");
    Eigen::Index N = chains.front().draws();
    for (const auto& c : chains) N = std::min(N, c.draws());
    const fs::path out = args.run / "diagnostics";
    fs::create_directories(out);

    std::ofstream diag(out / "diagnostics.csv"), trace(out / "trace.csv"), hist(out / "histogram.csv"),
        kde(out / "kde.csv");
    diag << "parameter,rhat,ess,flag\n";
    trace << "parameter,iteration,chain,value\n";
    hist << "parameter,chain,bin_lower,bin_upper,count\n";
    kde << "parameter,chain,x,density\n";
    int flagged = 0;
    const auto M = static_cast<Eigen::Index>(chains.size());
    for (const std::string& name : chains.front().scalar_names) {
        if (!monitored(name)) continue;
        const Eigen::Index col = chains.front().scalar_index(name);
        Eigen::MatrixXd x(N, M);
        for (Eigen::Index c = 0; c < M; ++c) x.col(c) = chains[static_cast<std::size_t>(c)].scalars.col(col).head(N);

        std::string flag;
        double rhat = std::numeric_limits<double>::quiet_NaN(), ess = std::numeric_limits<double>::quiet_NaN();
        if (N >= 4) rhat = split_rhat(x);
        if (N >= 8) {
            const EssResult e = effective_sample_size(x);
            ess = e.ess;
            if (e.degenerate) flag = "degenerate";
        }
        auto add = [&](const char* f) { flag += (flag.empty() ? "" : ";") + std::string(f); };
        if (std::isnan(rhat) || std::isnan(ess)) add("too_few_draws");
        if (!(rhat <= args.rhat_threshold) && !std::isnan(rhat)) add("rhat");
        if (ess < args.ess_threshold) add("ess");
        if (!flag.empty() && flag != "degenerate") ++flagged;
        diag << name << ',' << format_double(rhat) << ',' << format_double(ess) << ',' << flag << '\n';

        for (const TraceRow& r : trace_table(x, chains.front().iterations))
            trace << name << ',' << r.iteration << ',' << r.chain << ',' << format_double(r.value) << '\n';
        const Histogram h = histogram(x, args.bins);
        for (Eigen::Index c = 0; c < M; ++c)
            for (Eigen::Index b = 0; b < h.counts.rows(); ++b)
                hist << name << ',' << c + 1 << ',' << format_double(h.edges(b)) << ',' << format_double(h.edges(b + 1))
                     << ',' << h.counts(b, c) << '\n';
        if (N >= 2) {
            const Density d = kernel_density(x, args.kde_points);
            for (Eigen::Index c = 0; c < M; ++c)
                for (Eigen::Index g = 0; g < d.grid.size(); ++g)
                    kde << name << ',' << c + 1 << ',' << format_double(d.grid(g)) << ',' << format_double(d.density(g, c))
                        << '\n';
        }
    }
    std::cout << "diagnostics written to " << out.string() << "; " << flagged << " parameter(s) flagged\n";
    return flagged;
}

Labels recording_estimate(const std::vector<ChainArchive>& chains, Eigen::Index u, Eigen::Index k,
                          std::span<const int> group_of, ExpectedViMethod method) {
    return vi_point_estimate(recording_level_draws(chains, u, k, group_of), method).labels;
}

std::vector<DimensionSummary> summarize_chains(const std::vector<ChainArchive>& chains, std::span<const int> group_of,
                                               double level, ExpectedViMethod method) {
    if (chains.empty()) throw InputError("no chains to summarize");
    const Eigen::Index K = chains.front().components, U = chains.front().subjects;
    std::vector<DimensionSummary> out;
    for (Eigen::Index k = 0; k < K; ++k) {
        DimensionSummary s;
        const std::vector<Labels> draws = subject_level_draws(chains, k, group_of);
        const PointEstimate pe = vi_point_estimate(draws, method);
        s.estimate = pe.labels;
        s.expected_vi = pe.expected_vi;
        s.ball = credible_ball(draws, pe.labels, level);
        s.similarity = similarity_matrix(draws);
        s.subject_specific_prob = Eigen::VectorXd::Zero(U);
        double total = 0;
        for (const auto& a : chains) {
            total += static_cast<double>(a.draws());
            for (Eigen::Index d = 0; d < a.draws(); ++d)
                for (Eigen::Index u = 0; u < U; ++u) s.subject_specific_prob(u) += a.g_at(d, u, k) == 3;
        }
        s.subject_specific_prob /= total;
        for (Eigen::Index u = 0; u < U; ++u) {
            if (!(s.subject_specific_prob(u) > 0.5)) continue;
            const std::vector<Labels> rd = recording_level_draws(chains, u, k, group_of);
            const PointEstimate rpe = vi_point_estimate(rd, method);
            s.recording.push_back({u, rpe.labels, credible_ball(rd, rpe.labels, level)});
        }
        out.push_back(std::move(s));
    }
    return out;
}

void cmd_summarize(const SummarizeArgs& args) {
    const RunInfo info = read_run_info(args.run);
    const std::vector<ChainArchive> chains = read_run_chains(args.run, info);
    std::optional<GroundTruth> truth;
    if (!args.truth.empty()) {
        require_file(args.truth, "--truth");
        truth = read_truth(args.truth);
        if (static_cast<Eigen::Index>(truth->subject_level.size()) < info.components)
            throw DimensionError("truth has fewer dimensions than the run");
    }
    const auto method = args.exact_expected_vi ? ExpectedViMethod::Exact : ExpectedViMethod::LowerBound;
    const std::vector<DimensionSummary> summary = summarize_chains(chains, info.group_of, args.level, method);
    const fs::path out = args.run / "summary";
    fs::create_directories(out);

    std::ostringstream table;
    json metrics;
    for (std::size_t k = 0; k < summary.size(); ++k) {
        const DimensionSummary& s = summary[k];
        const std::string tag = "k" + std::to_string(k + 1);
        json report{{"dimension", k + 1},
                     {"subject_level", {{"estimate", s.estimate},
                                        {"clusters", cluster_count(s.estimate)},
                                        {"expected_vi", s.expected_vi},
                                        {"credible_ball", ball_json(s.ball)}}}};
        std::vector<double> prob(s.subject_specific_prob.data(), s.subject_specific_prob.data() + s.subject_specific_prob.size());
        report["subject_level"]["subject_specific_probability"] = prob;
        report["recording_level"] = json::array();
        table << "Dimension " << k + 1 << " (subject level, " << percent(args.level) << " credible ball, epsilon "
              << std::setprecision(4) << s.ball.epsilon << ")\n";
        table_rows(table, s.ball, s.estimate, true);
        for (const auto& r : s.recording) {
            report["recording_level"].push_back(
                {{"subject", r.subject + 1}, {"estimate", r.estimate}, {"credible_ball", ball_json(r.ball)}});
            table << "Dimension " << k + 1 << ", subject " << r.subject + 1 << " (recording level)\n";
            table_rows(table, r.ball, r.estimate, false);
        }
        table << '\n';
        write_text(out / ("report_" + tag + ".json"), report.dump(2) + "\n");
        std::vector<std::string> names;
        for (Eigen::Index u = 0; u < s.similarity.cols(); ++u) names.push_back("s" + std::to_string(u + 1));
        write_matrix_csv(out / ("similarity_" + tag + ".csv"), s.similarity, names);

        if (truth) {
            const Labels& t = truth->subject_level[k];
            json m{{"dimension", k + 1},
                   {"ari", adjusted_rand_index(t, s.estimate)},
                   {"vi", variation_of_information(t, s.estimate)},
                   {"exact_recovery", same_partition(t, s.estimate)}};
            m["recording_errors"] = json::array();
            for (const auto& r : truth->recording_level) {
                if (r.component != static_cast<Eigen::Index>(k)) continue;
                const Labels est = recording_estimate(chains, r.subject, r.component, info.group_of, method);
                m["recording_errors"].push_back(
                    {{"subject", r.subject + 1}, {"errors", classification_error(r.labels, est)}});
            }
            metrics.push_back(m);
        }
    }
    if (truth) {
        write_text(out / "truth_metrics.json", metrics.dump(2) + "\n");
        table << "Agreement with truth\n";
        for (const auto& m : metrics) {
            table << "  dimension " << m["dimension"].get<int>() << ": ARI " << std::fixed << std::setprecision(4)
                  << m["ari"].get<double>() << ", VI " << m["vi"].get<double>() << ", exact "
                  << (m["exact_recovery"].get<bool>() ? "yes" : "no") << '\n';
            for (const auto& r : m["recording_errors"])
                table << "    subject " << r["subject"].get<int>() << ": " << r["errors"].get<int>()
                      << " recording-level classification error(s)\n";
        }
        table.unsetf(std::ios::fixed);
    }
    write_text(out / "table.txt", table.str());
    std::cout << table.str();
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Bayesian functional PCA with multilevel partition priors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SimulateArgs sim;
    double snr = 6.0;
    std::uint64_t sim_seed = 1;
    auto* s = app.add_subcommand("simulate", "Generate synthetic datasets with planted partitions");
    s->add_option("--subjects", sim.design.subjects, "Subjects U")->capture_default_str();
    s->add_option("--channels", sim.design.channels, "Channels per subject n")->capture_default_str();
    s->add_option("--timepoints", sim.design.timepoints, "Time points T")->capture_default_str();
    s->add_option("--group-a", sim.design.group_a, "Subjects in the first group (default: half)")->capture_default_str();
    s->add_option("--snr", snr, "Signal-to-noise variance ratio")->capture_default_str();
    s->add_option("--replicates", sim.replicates, "Number of datasets")->capture_default_str();
    s->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
    s->add_option("--out", sim.out, "Output directory")->required();
    s->add_flag("--force", sim.force, "Overwrite a non-empty output directory");

    FitArgs fit;
    std::optional<double> penalty;
    auto* f = app.add_subcommand("fit", "Smooth, run fPCA, set priors and sample");
    f->add_option("--data", fit.data, "Dataset CSV")->required();
    f->add_option("--time", fit.time, "Time grid CSV")->required();
    f->add_option("--out", fit.out, "Run directory")->required();
    f->add_option("--iters", fit.iters, "Iterations per chain")->capture_default_str();
    f->add_option("--burnin", fit.burnin, "Discarded iterations")->capture_default_str();
    f->add_option("--thin", fit.thin, "Keep every thin-th draw")->capture_default_str();
    f->add_option("--chains", fit.chains, "Number of chains")->capture_default_str();
    f->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
    f->add_option("--scenario", fit.scenario, "Sensitivity scenario S1..S6");
    f->add_option("--hyperparams", fit.hyperparams, "Load prior constants from JSON instead of estimating");
    f->add_option("--set", fit.overrides, "Override a prior constant, key=value (repeatable)");
    f->add_option("--basis", fit.basis, "Directory with eigenfunctions.csv; skips fPCA");
    f->add_option("--var-threshold", fit.var_threshold, "Cumulative variance to retain")->capture_default_str();
    f->add_option("--min-share", fit.min_share, "Minimum variance share per component")->capture_default_str();
    f->add_option("--basis-size", fit.basis_size, "B-spline basis size")->capture_default_str();
    f->add_option("--penalty", penalty, "Fixed roughness penalty (default: GCV)");
    f->add_flag("--no-smooth", fit.no_smooth, "Use raw curves");
    f->add_option("--boot-reps", fit.boot_reps, "Bootstrap replicates for priors")->capture_default_str();
    f->add_option("--subject-labels", fit.subject_labels, "Truncation level of subject-specific labels")
        ->capture_default_str();
    f->add_option("--init", fit.init, "empirical or prior")->capture_default_str();
    f->add_option("--audit-every", fit.audit_every, "Log-joint audit interval (0 disables)")->capture_default_str();
    f->add_option("--checkpoint-every", fit.checkpoint_every, "Checkpoint interval (0 disables)")->capture_default_str();
    f->add_flag("--resume", fit.resume, "Continue chains from their checkpoints");
    f->add_flag("--force", fit.force, "Overwrite a non-empty run directory");
    f->add_option("--workers", fit.workers, "Parallel chains (default: cores, capped by MLPP_THREADS)");

    DiagnoseArgs diag;
    auto* d = app.add_subcommand("diagnose", "Split R-hat, ESS and trace/density exports");
    d->add_option("run", diag.run, "Run directory")->required();
    d->add_option("--rhat-threshold", diag.rhat_threshold, "Flag above this split R-hat")->capture_default_str();
    d->add_option("--ess-threshold", diag.ess_threshold, "Flag below this ESS")->capture_default_str();
    d->add_option("--bins", diag.bins, "Histogram bins")->capture_default_str();
    d->add_option("--kde-points", diag.kde_points, "Density grid size")->capture_default_str();

    SummarizeArgs sum;
    auto* m = app.add_subcommand("summarize", "Partition point estimates and credible balls");
    m->add_option("run", sum.run, "Run directory")->required();
    m->add_option("--truth", sum.truth, "truth.json from simulate");
    m->add_option("--level", sum.level, "Credible level")->capture_default_str();
    m->add_flag("--exact-expected-vi", sum.exact_expected_vi, "Average VI over draws instead of the lower bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (*s) {
            sim.design.snr = snr;
            sim.design.seed = sim_seed;
            cmd_simulate(sim);
        } else if (*f) {
            fit.penalty = penalty;
            cmd_fit(fit);
        } else if (*d) {
            cmd_diagnose(diag);
        } else if (*m) {
            cmd_summarize(sum);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace mlpp
