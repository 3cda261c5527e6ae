#include "madloop/config.hpp"
#include "madloop/errors.hpp"
#include "madloop/experiment.hpp"
#include "madloop/presets.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

using namespace madloop;

namespace {

struct RunOptions {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string out;
    int threads = 1;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--config", o.config_path, "experiment config or run manifest (JSON)");
    cmd->add_option("--preset", o.preset, "named preset (see `madloop presets`)");
    cmd->add_option("--seed", o.seed, "master seed; overrides MADLOOP_SEED and the config");
    cmd->add_option("--trials", o.trials, "number of independent trials");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
}

std::uint64_t parse_seed(const std::string& text, const char* origin) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(text, &used, 0);
        if (used != text.size() || text.front() == '-') {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string(origin) + " is not an unsigned 64-bit integer: '" + text + "'");
    }
}

// Config from --config or --preset, then seed precedence flag > env > config.
ExperimentConfig resolve(const RunOptions& o, std::initializer_list<const char*> commands) {
    if (o.config_path.empty() == o.preset.empty()) {
        throw ConfigError("give exactly one of --config or --preset");
    }
    ExperimentConfig c = o.preset.empty() ? load_config(o.config_path) : find_preset(o.preset).config;
    bool ok = false;
    for (const char* cmd : commands) {
        ok = ok || c.command == cmd;
    }
    if (!ok) {
        throw ConfigError("this subcommand cannot run a '" + c.command + "' config");
    }
    if (o.seed) {
        c.seed = *o.seed;
    } else if (const char* env = std::getenv("MADLOOP_SEED"); env != nullptr && *env != '\0') {
        c.seed = parse_seed(env, "MADLOOP_SEED");
    }
    if (o.trials) {
        c.trials = *o.trials;
    }
    c.validate();
    return c;
}

std::string default_out(const RunOptions& o, const ExperimentConfig& c) {
    if (!o.out.empty()) {
        return o.out;
    }
    return "runs/" + (o.preset.empty() ? c.command : o.preset);
}

int execute(const RunOptions& o, std::initializer_list<const char*> commands) {
    const ExperimentConfig c = resolve(o, commands);
    const std::string out = default_out(o, c);
    const int code = run_experiment(c, out, o.threads, std::cerr);
    std::cerr << "outputs in " << out << " (exit " << code << ")" << std::endl;
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"madloop: simulations of self-consuming generative training loops"};
    app.require_subcommand(1);

    RunOptions simulate_opts, sweep_opts, baseline_opts, ess_opts, check_opts;
    auto* simulate = app.add_subcommand("simulate", "run loop variants and write trajectories");
    add_run_options(simulate, simulate_opts);
    auto* sweep = app.add_subcommand("sweep", "phase-diagram sweep or p-fraction scaling study");
    add_run_options(sweep, sweep_opts);
    auto* baseline = app.add_subcommand("baseline", "W2 of single-shot fits against sample size");
    add_run_options(baseline, baseline_opts);
    auto* ess = app.add_subcommand("ess", "limiting distance and effective sample size of one fresh-data loop");
    add_run_options(ess, ess_opts);

    auto* check = app.add_subcommand("check", "Monte-Carlo checks of the one-step process");
    std::string check_kind;
    check->add_option("kind", check_kind, "martingale | trace")->check(CLI::IsMember({"martingale", "trace"}));
    add_run_options(check, check_opts);

    auto* list = app.add_subcommand("presets", "list presets, or print one as JSON");
    std::string show;
    list->add_option("--show", show, "preset to print");

    auto* report = app.add_subcommand("report", "summary table of a finished run");
    std::string run_dir;
    report->add_option("run_dir", run_dir, "directory containing manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*simulate) {
            return execute(simulate_opts, {"simulate"});
        }
        if (*sweep) {
            return execute(sweep_opts, {"sweep", "scaling"});
        }
        if (*baseline) {
            return execute(baseline_opts, {"baseline"});
        }
        if (*ess) {
            return execute(ess_opts, {"ess"});
        }
        if (*check) {
            RunOptions o = check_opts;
            if (o.config_path.empty() && o.preset.empty()) {
                if (check_kind.empty()) {
                    throw ConfigError("check needs a kind (martingale | trace) or --config");
                }
                ExperimentConfig c;
                c.command = "check";
                c.trials = 10000;
                c.reference = ReferenceSpec{"gaussian", 1, {}, {}};
                c.check = CheckSpec{};
                c.check->kind = check_kind;
                if (check_kind == "trace") {
                    c.check->dims = {1, 10};
                }
                if (o.seed) {
                    c.seed = *o.seed;
                } else if (const char* env = std::getenv("MADLOOP_SEED"); env != nullptr && *env != '\0') {
                    c.seed = parse_seed(env, "MADLOOP_SEED");
                }
                if (o.trials) {
                    c.trials = *o.trials;
                }
                c.validate();
                const std::string out = o.out.empty() ? "runs/check-" + check_kind : o.out;
                return run_experiment(c, out, o.threads, std::cout);
            }
            const ExperimentConfig c = resolve(o, {"check"});
            return run_experiment(c, default_out(o, c), o.threads, std::cout);
        }
        if (*list) {
            if (!show.empty()) {
                std::cout << config_to_json(find_preset(show).config).dump(2) << "\n";
                return kExitOk;
            }
            for (const auto& p : presets()) {
                std::cout << p.name << " (" << p.config.command << "): " << p.summary << "\n";
            }
            return kExitOk;
        }
        if (*report) {
            std::cout << render_report(run_dir);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitConfig;
    }
    return kExitOk;
}
