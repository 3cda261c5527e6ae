#pragma once

#include "madloop/metrics.hpp"
#include "madloop/model.hpp"
#include "madloop/rng.hpp"
#include "madloop/sample_set.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace madloop {

enum class LoopKind { fully_synthetic, synthetic_augmentation, fresh_data };

struct ModelFamily {
    enum class Kind { gaussian, gmm };
    Kind kind = Kind::gaussian;
    int components = 1;  ///< mixture size; 1 for the Gaussian family

    static ModelFamily gaussian() { return {}; }
    static ModelFamily gmm(int m) { return {Kind::gmm, m}; }
    bool operator==(const ModelFamily&) const = default;
};

/// One autophagous run.
///
/// Generation 1 is always fit on n_ini fresh reference draws. From generation
/// 2 on the training set depends on loop_kind:
///   fully_synthetic         n_s draws from the last `memory_k` models
///   synthetic_augmentation  the generation-1 real set, plus n_s new draws
///                           (plus every earlier synthetic draw if accumulating)
///   fresh_data              n_r new reference draws plus n_s model draws
/// When p_fraction is set the per-generation sizes are derived from total_n:
/// n_r = round(p * total_n), n_s = total_n - n_r.
struct LoopConfig {
    LoopKind loop_kind = LoopKind::fresh_data;
    ModelFamily family;
    std::size_t n_ini = 0;
    std::size_t n_r = 0;
    std::size_t n_s = 0;
    double lambda = 1.0;
    int generations = 1;
    int memory_k = 1;
    bool accumulate_synthetic = false;
    std::optional<double> p_fraction;
    std::optional<std::size_t> total_n;
    std::uint64_t seed = 0;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
    [[nodiscard]] std::size_t real_per_generation() const;
    [[nodiscard]] std::size_t synthetic_per_generation() const;

    bool operator==(const LoopConfig&) const = default;
};

/// What to measure at each generation.
struct MetricOptions {
    int pr_stride = 0;                       ///< precision/recall every n generations (plus t=1 and t=T); 0 = never
    std::size_t eval_samples = 1000;         ///< size of real and synthetic evaluation draws
    int k = 5;
    int modal_stride = 1;                    ///< modal panel cadence for mixture references; 0 = never
    std::size_t modal_reference_samples = 10000;
    bool keep_models = true;                 ///< store G^t in every record

    bool operator==(const MetricOptions&) const = default;
};

struct GenerationRecord {
    int t = 1;
    std::optional<Model> model;
    MetricPanel metrics;
    std::size_t n_real = 0;
    std::size_t n_synthetic = 0;
};

enum class RunStatus { completed, degenerate };

struct LoopResult {
    std::vector<GenerationRecord> records;
    RunStatus status = RunStatus::completed;
    std::string message;
    StreamKey key;
};

/// Mutable state carried between generations of one run.
struct LoopState {
    SampleSet fixed_real;        ///< generation-1 real data
    SampleSet synthetic_pool;    ///< every synthetic draw so far (accumulating variant)
    std::deque<Model> history;   ///< most recent model first; at most memory_k entries
};

/// Builds D^t for t >= 2 and updates the synthetic pool when accumulating.
SampleSet assemble_training_set(int t, const LoopConfig& config, LoopState& state, const Model& reference, Rng& rng);

/// Fits a member of the family; the stream is used only by mixture fits.
Model fit_model(const ModelFamily& family, const SampleSet& data, Rng& rng);

/// Runs generations 1..T. A fit failure ends the run early with
/// status == degenerate and the records produced so far.
LoopResult run_loop(const LoopConfig& config, const Model& reference, const MetricOptions& metrics,
                    const StreamKey& key);

/// Independent trials on streams {config.seed, [trial]}, returned in trial order.
std::vector<LoopResult> run_trials(const LoopConfig& config, const Model& reference, const MetricOptions& metrics,
                                   int trials, int threads = 1);

std::string to_string(LoopKind kind);
LoopKind loop_kind_from_string(const std::string& name);

} // namespace madloop
