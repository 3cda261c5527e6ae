#include "madloop/experiment.hpp"

#include "madloop/errors.hpp"
#include "madloop/output.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace madloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// Collects outputs relative to the run directory.
struct Writer {
    fs::path root;
    std::vector<std::string> outputs;

    void write(const std::string& relative, const std::string& content) {
        write_atomic(root / relative, content);
        outputs.push_back(relative);
    }
};

int simulate(const ExperimentConfig& c, Writer& w, int threads, std::ostream& log) {
    const Model reference = c.reference.build();
    const bool modal = std::holds_alternative<GmmParams>(reference) && c.metrics.modal_stride > 0;
    const bool nested = c.variants.size() > 1;
    int code = kExitOk;
    for (const auto& v : c.variants) {
        LoopConfig loop = v.loop;
        loop.seed = c.seed;
        log << "simulate " << v.name << ": " << to_string(loop.loop_kind) << ", T=" << loop.generations
            << ", trials=" << c.trials << std::endl;
        const auto results = run_trials(loop, reference, c.metrics, c.trials, threads);
        const std::string prefix = nested ? v.name + "/" : "";
        w.write(prefix + "trajectory.csv", trajectory_csv(results, modal));
        w.write(prefix + "trajectory_mean.csv", trajectory_mean_csv(results, modal));
        w.write(prefix + "trajectory_se.csv", trajectory_se_csv(results, modal));
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (results[i].status == RunStatus::degenerate) {
                log << "  trial " << i << " degenerate: " << results[i].message << std::endl;
                code = kExitDegenerate;
            }
        }
    }
    return code;
}

int sweep(const ExperimentConfig& c, Writer& w, int threads, std::ostream& log) {
    SweepOptions options;
    options.trials = c.trials;
    options.rule = c.sweep->rule;
    options.baseline_grid = c.sweep->baseline_grid;
    options.baseline_trials = c.sweep->baseline_trials;
    log << "sweep: " << c.sweep->axes.n_r.size() * c.sweep->axes.n_s.size() * c.sweep->axes.lambda.size() *
                            c.sweep->axes.memory_k.size()
        << " cells, trials=" << c.trials << std::endl;
    const SweepResult result = sweep_phase_diagram(c.sweep->axes, c.reference.gaussian(), options, c.seed, threads);
    w.write("baseline.csv", baseline_csv(result.baseline));
    w.write("sweep.csv", sweep_csv(result.cells));
    w.write("frontier.csv", frontier_csv(result.frontier));
    int code = kExitOk;
    for (const auto& cell : result.cells) {
        if (cell.status != "ok") {
            log << "  cell n_r=" << cell.n_r << " n_s=" << cell.n_s << " lambda=" << cell.lambda << ": " << cell.status
                << std::endl;
            const bool degenerate = cell.status.rfind("degenerate", 0) == 0;
            code = std::max<int>(code, degenerate ? kExitDegenerate : kExitNotConverged);
        }
    }
    return code;
}

int scaling(const ExperimentConfig& c, Writer& w, int threads, std::ostream& log) {
    log << "scaling: " << c.scaling->p.size() * c.scaling->total_n.size() * c.scaling->lambda.size()
        << " cells, trials=" << c.trials << std::endl;
    const ScalingResult result = scaling_study(c.scaling->p, c.scaling->total_n, c.scaling->lambda,
                                               c.reference.gaussian(), c.trials, c.scaling->rule, c.seed, threads);
    w.write("scaling.csv", scaling_csv(result.rows));
    w.write("scaling_slopes.csv", scaling_slopes_csv(result.slopes));
    for (const auto& r : result.rows) {
        if (r.status != "ok") {
            return kExitNotConverged;
        }
    }
    return kExitOk;
}

int baseline(const ExperimentConfig& c, Writer& w, int threads) {
    const BaselineCurve curve = build_baseline(c.reference.gaussian(), c.baseline->grid, c.trials, c.seed, threads);
    w.write("baseline.csv", baseline_csv(curve));
    return kExitOk;
}

json limit_json(const LimitEstimate& e) {
    return {{"limit_wd2", e.limit_wd2}, {"se", e.se},           {"window", e.window},
            {"generations", e.generations}, {"trials", e.trials}, {"slope", e.slope},
            {"slope_low", e.slope_low},   {"slope_high", e.slope_high}, {"converged", e.converged},
            {"seed", e.config.seed}};
}

int ess(const ExperimentConfig& c, Writer& w, int threads, std::ostream& log) {
    const GaussianParams reference = c.reference.gaussian();
    const auto grid = c.ess->baseline_grid.empty() ? log_grid(20, 20000, 31) : c.ess->baseline_grid;
    const std::uint64_t baseline_path[] = {0xba5e};
    const BaselineCurve curve =
        build_baseline(reference, grid, c.ess->baseline_trials, stream_seed(c.seed, baseline_path), threads);
    w.write("baseline.csv", baseline_csv(curve));

    LoopConfig loop = c.ess->loop;
    loop.seed = c.seed;
    json report;
    report["loop"] = loop_to_json(loop);
    int code = kExitOk;
    try {
        const LimitEstimate est = limiting_distance(loop, reference, c.trials, threads);
        const EssResult r = effective_sample_size(est.limit_wd2, est.se, curve, loop.real_per_generation());
        report["limit"] = limit_json(est);
        report["n_e"] = r.n_e;
        report["ratio"] = r.ratio;
        report["admissible"] = r.admissible;
        report["range"] = to_string(r.range);
        log << "ess: limit_wd2=" << est.limit_wd2 << " n_e=" << r.n_e << " ratio=" << r.ratio << std::endl;
    } catch (const NotConvergedError& e) {
        report["limit"] = limit_json(e.estimate());
        report["error"] = e.what();
        log << "ess: " << e.what() << std::endl;
        code = kExitNotConverged;
    }
    w.write("ess.json", report.dump(2) + "\n");
    return code;
}

int check(const ExperimentConfig& c, Writer& w, std::ostream& log) {
    json reports = json::array();
    bool all_pass = true;
    const StreamKey root{c.seed, {}};
    for (int d : c.check->dims) {
        const GaussianParams state = check_state(d, c.seed);
        // Cases differing only in lambda share their draws.
        const StreamKey key = root.child({1, static_cast<std::uint64_t>(d)});
        for (double lambda : c.check->lambda) {
            json r{{"kind", c.check->kind}, {"dim", d}, {"lambda", lambda}, {"n_s", c.check->n_s},
                   {"trials", c.trials}, {"seed", c.seed}, {"path", key.path}};
            bool pass = false;
            std::ostringstream line;
            line << c.check->kind << " d=" << d << " lambda=" << lambda << ": ";
            if (c.check->kind == "martingale") {
                const OneStepReport rep = one_step_distribution_check(state, c.check->n_s, lambda, c.trials, key);
                pass = rep.pass;
                r["max_abs_z_mean"] = rep.max_abs_z_mean;
                r["max_abs_z_cov"] = rep.max_abs_z_cov;
                line << "max|z| mean " << rep.max_abs_z_mean << ", cov " << rep.max_abs_z_cov;
            } else {
                const TraceReport rep = trace_process_check(state, c.check->n_s, lambda, c.trials, key);
                pass = rep.pass;
                r["mean_y"] = rep.mean_y;
                r["z_mean"] = rep.z_mean;
                r["var_y"] = rep.var_y;
                r["analytic_var_y"] = rep.analytic_var_y;
                r["mean_trace"] = rep.mean_trace;
                line << "E[Y] " << rep.mean_y << " (z " << rep.z_mean << "), Var[Y] " << rep.var_y << " vs "
                     << rep.analytic_var_y;
            }
            r["pass"] = pass;
            all_pass = all_pass && pass;
            log << (pass ? "PASS " : "FAIL ") << line.str() << std::endl;
            reports.push_back(r);
        }
    }
    w.write("check.json", json{{"pass", all_pass}, {"reports", reports}}.dump(2) + "\n");
    return all_pass ? kExitOk : kExitCheckFailed;
}

} // namespace

GaussianParams check_state(int d, std::uint64_t seed) {
    if (d < 1) {
        throw ConfigError("check dimension must be >= 1");
    }
    Rng rng = derive_stream(seed, {0xc0de, static_cast<std::uint64_t>(d)});
    Eigen::VectorXd mean(d);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i) {
        mean(i) = rng.normal();
    }
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            a(i, j) = rng.normal();
        }
    }
    Eigen::MatrixXd cov = a * a.transpose() / d + 0.1 * Eigen::MatrixXd::Identity(d, d);
    cov = (0.5 * (cov + cov.transpose())).eval();
    return {mean, cov};
}

int run_experiment(const ExperimentConfig& config, const fs::path& out_dir, int threads, std::ostream& log) {
    config.validate();
    if (threads < 1) {
        throw ConfigError("threads must be >= 1");
    }
    Writer w{out_dir, {}};
    fs::create_directories(out_dir);
    const std::string started = utc_now();

    int code = kExitOk;
    std::string error;
    try {
        if (config.command == "simulate") {
            code = simulate(config, w, threads, log);
        } else if (config.command == "sweep") {
            code = sweep(config, w, threads, log);
        } else if (config.command == "scaling") {
            code = scaling(config, w, threads, log);
        } else if (config.command == "baseline") {
            code = baseline(config, w, threads);
        } else if (config.command == "ess") {
            code = ess(config, w, threads, log);
        } else {
            code = check(config, w, log);
        }
    } catch (const DataQualityError& e) {
        error = e.what();
        code = kExitNotConverged;
    } catch (const LoopDegenerateError& e) {
        error = e.what();
        code = kExitDegenerate;
    }
    if (!error.empty()) {
        log << "error: " << error << std::endl;
    }

    json manifest;
    manifest["manifest_version"] = 1;
    manifest["csv_schema_version"] = 1;
    manifest["tool_version"] = kToolVersion;
    manifest["config"] = config_to_json(config);
    manifest["master_seed"] = config.seed;
    manifest["config_digest"] = hex64(config_digest(config));
    manifest["started"] = started;
    manifest["finished"] = utc_now();
    manifest["threads"] = threads;
    manifest["outputs"] = w.outputs;
    manifest["exit_code"] = code;
    if (!error.empty()) {
        manifest["error"] = error;
    }
    write_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return code;
}

namespace {

std::string cell(const std::vector<std::string>& row, int col) {
    return col >= 0 && static_cast<std::size_t>(col) < row.size() ? row[static_cast<std::size_t>(col)] : "";
}

std::string short_number(const std::string& s, int precision = 4) {
    if (s.empty()) {
        return "-";
    }
    std::ostringstream os;
    os << std::setprecision(precision) << std::stod(s);
    return os.str();
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& r : rows) {
        widths.resize(std::max(widths.size(), r.size()), 0);
        for (std::size_t i = 0; i < r.size(); ++i) {
            widths[i] = std::max(widths[i], r[i].size());
        }
    }
    std::ostringstream os;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            os << (i ? "  " : "") << std::left << std::setw(static_cast<int>(widths[i])) << r[i];
        }
        os << '\n';
    }
    return os.str();
}

// Per-variant row: endpoints of the mean trajectory plus the trend verdict.
std::vector<std::string> simulate_row(const std::string& name, const fs::path& dir) {
    const CsvTable traj = read_csv(dir / "trajectory.csv");
    const CsvTable mean = read_csv(dir / "trajectory_mean.csv");
    const CsvTable se = read_csv(dir / "trajectory_se.csv");
    if (mean.rows.empty()) {
        return {name, "0", "0", "-", "-", "-", "-", "-", "-"};
    }
    // Split the long table into trials at each restart of t.
    std::vector<std::vector<double>> series;
    for (const auto& row : traj.rows) {
        if (row[0] == "1") {
            series.emplace_back();
        }
        series.back().push_back(std::stod(cell(row, traj.column("wd2"))));
    }
    std::string verdict = "-";
    const std::size_t T = mean.rows.size();
    bool rectangular = !series.empty();
    for (const auto& s : series) {
        rectangular = rectangular && s.size() == T;
    }
    if (rectangular) {
        Eigen::MatrixXd wd2(static_cast<Eigen::Index>(series.size()), static_cast<Eigen::Index>(T));
        for (std::size_t i = 0; i < series.size(); ++i) {
            for (std::size_t t = 0; t < T; ++t) {
                wd2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = series[i][t];
            }
        }
        verdict = to_string(madness_detector(TrajectoryStats::from_wd2(wd2)).verdict);
    } else {
        verdict = "degenerate";
    }
    const auto& first = mean.rows.front();
    const auto& last = mean.rows.back();
    const auto& last_se = se.rows.back();
    return {name,
            std::to_string(series.size()),
            std::to_string(T),
            short_number(cell(first, mean.column("wd2"))),
            short_number(cell(last, mean.column("wd2"))) + " +- " + short_number(cell(last_se, se.column("wd2")), 2),
            short_number(cell(last, mean.column("trace_cov"))),
            short_number(cell(last, mean.column("precision")), 3),
            short_number(cell(last, mean.column("recall")), 3),
            verdict};
}

} // namespace

std::string render_report(const fs::path& run_dir) {
    std::ifstream in(run_dir / "manifest.json");
    if (!in) {
        throw ConfigError("no manifest.json in '" + run_dir.string() + "'");
    }
    const json manifest = json::parse(in);
    const ExperimentConfig config = config_from_json(manifest.at("config"));
    std::ostringstream os;
    os << "run: " << run_dir.string() << "\n"
       << "command: " << config.command << "  seed: " << config.seed << "  trials: " << config.trials
       << "  digest: " << manifest.value("config_digest", "") << "  exit: " << manifest.value("exit_code", -1) << "\n";
    if (!config.description.empty()) {
        os << config.description << "\n";
    }
    os << "\n";
    if (config.command == "simulate") {
        std::vector<std::vector<std::string>> rows{
            {"variant", "trials", "T", "wd2[1]", "wd2[T]", "trace[T]", "prec[T]", "recall[T]", "verdict"}};
        for (const auto& v : config.variants) {
            rows.push_back(simulate_row(v.name, config.variants.size() > 1 ? run_dir / v.name : run_dir));
        }
        os << render_table(rows);
        return os.str();
    }
    for (const auto& out : manifest.at("outputs")) {
        const std::string name = out.get<std::string>();
        if (name.size() < 4 || name.substr(name.size() - 4) != ".csv") {
            continue;
        }
        const CsvTable t = read_csv(run_dir / name);
        std::vector<std::vector<std::string>> rows{t.header};
        for (const auto& r : t.rows) {
            std::vector<std::string> pretty;
            for (const auto& v : r) {
                char* end = nullptr;
                std::strtod(v.c_str(), &end);
                pretty.push_back(!v.empty() && end && *end == '\0' ? short_number(v) : v);
            }
            rows.push_back(pretty);
        }
        os << name << "\n" << render_table(rows) << "\n";
    }
    return os.str();
}

} // namespace madloop
