#include "madloop/presets.hpp"

#include "madloop/errors.hpp"

namespace madloop {

namespace {

constexpr int kGaussianDim = 100;
constexpr std::uint64_t kPresetSeed = 20240521;

ExperimentConfig base(const std::string& command, const std::string& description, int trials) {
    ExperimentConfig c;
    c.command = command;
    c.description = description;
    c.seed = kPresetSeed;
    c.trials = trials;
    c.reference.family = "gaussian";
    c.reference.dim = kGaussianDim;
    c.metrics.pr_stride = 0;
    c.metrics.modal_stride = 0;
    c.metrics.keep_models = false;
    return c;
}

LoopConfig fresh(std::size_t n_ini, std::size_t n_r, std::size_t n_s, double lambda, int generations) {
    LoopConfig l;
    l.loop_kind = LoopKind::fresh_data;
    l.n_ini = n_ini;
    l.n_r = n_r;
    l.n_s = n_s;
    l.lambda = lambda;
    l.generations = generations;
    return l;
}

SweepSpec sensitivity(std::vector<double> lambdas) {
    SweepSpec s;
    s.axes.n_r = {100, 250, 1000};
    s.axes.n_s = {100, 250, 500, 1000, 2000, 4000};
    s.axes.lambda = std::move(lambdas);
    s.baseline_grid = log_grid(20, 20000, 31);
    return s;
}

std::vector<Preset> build() {
    std::vector<Preset> out;

    {
        ExperimentConfig c = base("simulate", "fresh-data loop from two initial sample sizes, biased and unbiased", 10);
        for (std::size_t n_ini : {100, 1000}) {
            for (double lambda : {1.0, 0.8}) {
                const std::string lam = lambda == 1.0 ? "1" : "08";
                c.variants.push_back({"nini" + std::to_string(n_ini) + "_lam" + lam, fresh(n_ini, 100, 900, lambda, 50)});
            }
        }
        out.push_back({"fig-initial-point", "n_r=100, n_s=900, n_ini in {100, 1000}, lambda in {0.8, 1}", c});
    }
    {
        ExperimentConfig c = base("sweep", "n_e/n_r heatmap over n_s for three bias levels", 20);
        c.sweep = sensitivity({0.7, 0.85, 1.0});
        out.push_back({"fig-sensitivity-lambda", "n_r in {100, 250, 1000} x n_s grid, panels lambda in {0.7, 0.85, 1}", c});
    }
    {
        ExperimentConfig c = base("sweep", "admissible n_s frontier against bias for three real-data sizes", 20);
        c.sweep = sensitivity({0.7, 0.85, 0.9, 0.95, 1.0});
        out.push_back({"fig-sensitivity-nr", "panels n_r in {100, 250, 1000}, lambda grid 0.7..1", c});
    }
    {
        ExperimentConfig c = base("sweep", "synthetic data drawn from the K most recent models", 10);
        SweepSpec s;
        s.axes.n_r = {1000};
        s.axes.n_s = {10000};
        s.axes.lambda = {1.0};
        s.axes.memory_k = {1, 2, 4, 8, 16};
        s.baseline_grid = log_grid(20, 50000, 33);
        c.sweep = s;
        out.push_back({"appendix-f-k", "n_r=1000, n_s=10000, lambda=1, K in {1, 2, 4, 8, 16}", c});
    }
    {
        ExperimentConfig c = base("scaling", "limiting distance against total size when a fraction p is real", 10);
        ScalingSpec s;
        s.p = {0.1, 0.25, 0.5, 1.0};
        s.total_n = {100, 300, 1000, 3000, 10000};
        s.lambda = {1.0, 0.9};
        c.scaling = s;
        out.push_back({"appendix-f-p", "p in {10%, 25%, 50%, 100%}, n from 100 to 10000, lambda in {1, 0.9}", c});
    }
    {
        ExperimentConfig c = base("simulate", "fully synthetic loop of 25-component mixtures on the 5x5 grid", 1);
        c.reference = ReferenceSpec{"grid25", 2, {}, {}};
        c.metrics.pr_stride = 20;
        c.metrics.modal_stride = 20;
        c.metrics.eval_samples = 5000;
        LoopConfig l;
        l.loop_kind = LoopKind::fully_synthetic;
        l.family = ModelFamily::gmm(25);
        l.n_ini = 5000;
        l.n_s = 5000;
        l.generations = 2000;
        c.variants.push_back({"gmm25", l});
        out.push_back({"gmm-collapse", "grid25 reference, gmm(25), n = 5000, T = 2000", c});
    }
    {
        ExperimentConfig c = base("simulate", "fully synthetic Gaussian loop, unbiased and biased", 10);
        for (double lambda : {1.0, 0.9}) {
            LoopConfig l;
            l.loop_kind = LoopKind::fully_synthetic;
            l.n_ini = 1000;
            l.n_s = 1000;
            l.lambda = lambda;
            l.generations = 200;
            c.variants.push_back({lambda == 1.0 ? "lam1" : "lam09", l});
        }
        out.push_back({"fully-synthetic", "n_s=1000, T=200, lambda in {1, 0.9}", c});
    }
    {
        ExperimentConfig c = base("simulate", "synthetic augmentation with and without the growing pool", 10);
        for (bool acc : {false, true}) {
            LoopConfig l;
            l.loop_kind = LoopKind::synthetic_augmentation;
            l.n_ini = 1000;
            l.n_s = 1000;
            l.generations = 100;
            l.accumulate_synthetic = acc;
            c.variants.push_back({acc ? "accumulate" : "replace", l});
        }
        out.push_back({"synthetic-augmentation", "n_ini=1000 real kept, n_s=1000 per generation, T=100", c});
    }
    for (const auto& p : out) {
        p.config.validate();
    }
    return out;
}

} // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = build();
    return all;
}

const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets()) {
        if (p.name == name) {
            return p;
        }
    }
    std::string names;
    for (const auto& p : presets()) {
        names += (names.empty() ? "" : ", ") + p.name;
    }
    throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
}

} // namespace madloop
