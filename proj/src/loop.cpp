#include "madloop/loop.hpp"

#include "madloop/errors.hpp"
#include "madloop/parallel.hpp"

#include <cmath>
#include <string>

namespace madloop {

std::string to_string(LoopKind kind) {
    switch (kind) {
    case LoopKind::fully_synthetic:
        return "fully_synthetic";
    case LoopKind::synthetic_augmentation:
        return "synthetic_augmentation";
    case LoopKind::fresh_data:
        return "fresh_data";
    }
    return "unknown";
}

LoopKind loop_kind_from_string(const std::string& name) {
    if (name == "fully_synthetic") {
        return LoopKind::fully_synthetic;
    }
    if (name == "synthetic_augmentation") {
        return LoopKind::synthetic_augmentation;
    }
    if (name == "fresh_data") {
        return LoopKind::fresh_data;
    }
    throw ConfigError("unknown loop_kind '" + name + "'");
}

void LoopConfig::validate() const {
    if (generations < 1) {
        throw ConfigError("generations must be >= 1");
    }
    if (n_ini < 1) {
        throw ConfigError("n_ini must be >= 1");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in [0, 1]");
    }
    if (memory_k < 1) {
        throw ConfigError("memory_k must be >= 1");
    }
    if (family.kind == ModelFamily::Kind::gmm && family.components < 1) {
        throw ConfigError("mixture family needs components >= 1");
    }
    if (family.kind == ModelFamily::Kind::gaussian && family.components != 1) {
        throw ConfigError("Gaussian family has exactly one component");
    }
    if (p_fraction.has_value()) {
        if (!total_n.has_value()) {
            throw ConfigError("p_fraction requires total_n");
        }
        if (!(*p_fraction > 0.0 && *p_fraction <= 1.0)) {
            throw ConfigError("p_fraction must lie in (0, 1]");
        }
        if (loop_kind != LoopKind::fresh_data) {
            throw ConfigError("p_fraction applies only to the fresh_data loop");
        }
        if (n_r != 0 || n_s != 0) {
            throw ConfigError("n_r and n_s are derived from p_fraction and total_n; leave them at 0");
        }
    } else if (total_n.has_value()) {
        throw ConfigError("total_n is only meaningful together with p_fraction");
    }
    if (loop_kind == LoopKind::fully_synthetic && n_r != 0) {
        throw ConfigError("fully_synthetic loops use no real data after generation 1 (n_r must be 0)");
    }
    if (loop_kind == LoopKind::synthetic_augmentation && n_r != 0) {
        throw ConfigError("synthetic_augmentation reuses the generation-1 real set (n_r must be 0)");
    }
    if (generations >= 2 && real_per_generation() + synthetic_per_generation() == 0 &&
        loop_kind != LoopKind::synthetic_augmentation) {
        throw ConfigError("training set for t >= 2 would be empty");
    }
}

std::size_t LoopConfig::real_per_generation() const {
    if (p_fraction.has_value() && total_n.has_value()) {
        return static_cast<std::size_t>(std::llround(*p_fraction * static_cast<double>(*total_n)));
    }
    return n_r;
}

std::size_t LoopConfig::synthetic_per_generation() const {
    if (p_fraction.has_value() && total_n.has_value()) {
        return *total_n - real_per_generation();
    }
    return n_s;
}

namespace {

// n draws, each from a model chosen uniformly among the most recent
// min(K, history) models; draws are generated source by source, newest first.
SampleSet draw_from_history(const LoopState& state, int memory_k, double lambda, std::size_t n, int t, Rng& rng) {
    const std::size_t sources = std::min<std::size_t>(static_cast<std::size_t>(memory_k), state.history.size());
    std::vector<std::size_t> counts(sources, 0);
    if (sources == 1) {
        counts[0] = n;
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[rng.index(sources)];
        }
    }
    SampleSet out;
    for (std::size_t s = 0; s < sources; ++s) {
        if (counts[s] > 0) {
            out.append(sample_model(state.history[s], lambda, counts[s], rng, Provenance::synthetic, t));
        }
    }
    return out;
}

} // namespace

SampleSet assemble_training_set(int t, const LoopConfig& config, LoopState& state, const Model& reference, Rng& rng) {
    if (t < 2) {
        throw InvariantViolation("assemble_training_set is for generations t >= 2");
    }
    if (state.history.empty()) {
        throw InvariantViolation("no previous model available at generation " + std::to_string(t));
    }
    const std::size_t n_real = config.real_per_generation();
    const std::size_t n_syn = config.synthetic_per_generation();

    SampleSet out;
    switch (config.loop_kind) {
    case LoopKind::fully_synthetic:
        if (n_syn > 0) {
            out = draw_from_history(state, config.memory_k, config.lambda, n_syn, t, rng);
        }
        break;
    case LoopKind::synthetic_augmentation: {
        out = state.fixed_real;
        SampleSet fresh_syn;
        if (n_syn > 0) {
            fresh_syn = draw_from_history(state, config.memory_k, config.lambda, n_syn, t, rng);
        }
        if (config.accumulate_synthetic) {
            out.append(state.synthetic_pool);
            state.synthetic_pool.append(fresh_syn);
        }
        out.append(fresh_syn);
        break;
    }
    case LoopKind::fresh_data:
        if (n_real > 0) {
            out = sample_model(reference, 1.0, n_real, rng, Provenance::real, t);
        }
        if (n_syn > 0) {
            out.append(draw_from_history(state, config.memory_k, config.lambda, n_syn, t, rng));
        }
        break;
    }
    return out;
}

Model fit_model(const ModelFamily& family, const SampleSet& data, Rng& rng) {
    if (data.empty()) {
        throw InsufficientDataError("empty training set");
    }
    if (family.kind == ModelFamily::Kind::gaussian) {
        return fit_gaussian(data);
    }
    return fit_gmm(data, family.components, rng).model;
}

namespace {

// Evaluation draws fixed for the whole trial.
struct EvalContext {
    GaussianParams reference_summary;
    const GmmParams* reference_gmm = nullptr;
    std::optional<SampleSet> real_eval;
    std::optional<SampleSet> modal_reference;
};

bool on_stride(int t, int generations, int stride) {
    return stride > 0 && (t == 1 || t == generations || t % stride == 0);
}

MetricPanel evaluate(const Model& model, int t, const LoopConfig& config, const MetricOptions& options,
                     const EvalContext& ctx, const StreamKey& key) {
    MetricPanel panel;
    const GaussianParams summary = gaussian_summary(model);
    panel.wd2 = wasserstein2_gaussian(summary, ctx.reference_summary);
    panel.trace_cov = summary.trace();

    const bool want_pr = ctx.real_eval.has_value() && on_stride(t, config.generations, options.pr_stride);
    const bool want_modal = ctx.modal_reference.has_value() && on_stride(t, config.generations, options.modal_stride);
    if (!want_pr && !want_modal) {
        return panel;
    }
    Rng rng = key.child({static_cast<std::uint64_t>(t), 1}).rng();
    const SampleSet synthetic =
        sample_model(model, config.lambda, options.eval_samples, rng, Provenance::synthetic, t);
    if (want_pr) {
        panel.precision = precision(*ctx.real_eval, synthetic, options.k);
        panel.recall = recall(*ctx.real_eval, synthetic, options.k);
    }
    if (want_modal) {
        const ModalPanel modal = modal_panel(synthetic, *ctx.reference_gmm, *ctx.modal_reference, options.k);
        panel.avg_modal_variance = modal.avg_modal_variance;
        panel.mode_recall = modal.mode_recall;
    }
    return panel;
}

void remember(LoopState& state, Model model, int memory_k) {
    state.history.push_front(std::move(model));
    while (state.history.size() > static_cast<std::size_t>(memory_k)) {
        state.history.pop_back();
    }
}

} // namespace

LoopResult run_loop(const LoopConfig& config, const Model& reference, const MetricOptions& options,
                    const StreamKey& key) {
    config.validate();
    LoopResult result;
    result.key = key;

    EvalContext ctx{gaussian_summary(reference), std::get_if<GmmParams>(&reference), std::nullopt, std::nullopt};
    if (options.pr_stride > 0) {
        Rng rng = key.child({0, 0}).rng();
        ctx.real_eval = sample_model(reference, 1.0, options.eval_samples, rng, Provenance::real, 1);
    }
    if (ctx.reference_gmm != nullptr && options.modal_stride > 0) {
        Rng rng = key.child({0, 1}).rng();
        ctx.modal_reference = sample_model(reference, 1.0, options.modal_reference_samples, rng, Provenance::real, 1);
    }

    LoopState state;
    try {
        for (int t = 1; t <= config.generations; ++t) {
            Rng rng = key.child({static_cast<std::uint64_t>(t), 0}).rng();
            SampleSet data = t == 1 ? sample_model(reference, 1.0, config.n_ini, rng, Provenance::real, 1)
                                    : assemble_training_set(t, config, state, reference, rng);
            if (t == 1) {
                state.fixed_real = data;
            }
            Model model = fit_model(config.family, data, rng);

            GenerationRecord record;
            record.t = t;
            record.n_real = data.count(Provenance::real);
            record.n_synthetic = data.count(Provenance::synthetic);
            record.metrics = evaluate(model, t, config, options, ctx, key);
            if (options.keep_models) {
                record.model = model;
            }
            result.records.push_back(std::move(record));
            remember(state, std::move(model), config.memory_k);
        }
    } catch (const InsufficientDataError& e) {
        result.status = RunStatus::degenerate;
        result.message = "generation " + std::to_string(result.records.size() + 1) + ": " + e.what();
    } catch (const InvalidDataError& e) {
        result.status = RunStatus::degenerate;
        result.message = "generation " + std::to_string(result.records.size() + 1) + ": " + e.what();
    }
    return result;
}

std::vector<LoopResult> run_trials(const LoopConfig& config, const Model& reference, const MetricOptions& metrics,
                                   int trials, int threads) {
    config.validate();
    const StreamKey root{config.seed, {}};
    return parallel_map(static_cast<std::size_t>(std::max(trials, 0)), threads, [&](std::size_t trial) {
        return run_loop(config, reference, metrics, root.child(trial));
    });
}

} // namespace madloop
