#pragma once

#include "madloop/ess.hpp"
#include "madloop/loop.hpp"
#include "madloop/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace madloop {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Reference distribution. "gaussian" is N(0, I_dim) unless mean/cov are
/// given; "grid25" is the 5x5 mixture returned by reference_grid_gmm().
struct ReferenceSpec {
    std::string family = "gaussian";
    int dim = 0;
    std::vector<double> mean;
    std::vector<std::vector<double>> cov;

    [[nodiscard]] Model build() const;
    /// The Gaussian reference; ConfigError for mixture references.
    [[nodiscard]] GaussianParams gaussian() const;
    bool operator==(const ReferenceSpec&) const = default;
};

struct Variant {
    std::string name;
    LoopConfig loop;  ///< seed is ignored; every variant runs on the experiment seed
    bool operator==(const Variant&) const = default;
};

struct SweepSpec {
    SweepAxes axes;
    GenerationRule rule;
    std::vector<std::size_t> baseline_grid;
    int baseline_trials = 20;
    bool operator==(const SweepSpec&) const = default;
};

struct ScalingSpec {
    std::vector<double> p;
    std::vector<std::size_t> total_n;
    std::vector<double> lambda;
    GenerationRule rule;
    bool operator==(const ScalingSpec&) const = default;
};

struct BaselineSpec {
    std::vector<std::size_t> grid;
    bool operator==(const BaselineSpec&) const = default;
};

struct EssSpec {
    LoopConfig loop;
    std::vector<std::size_t> baseline_grid;
    int baseline_trials = 20;
    bool operator==(const EssSpec&) const = default;
};

struct CheckSpec {
    std::string kind = "martingale";  ///< "martingale" or "trace"
    std::vector<int> dims{1, 5};
    std::vector<double> lambda{0.5, 1.0};
    std::size_t n_s = 50;
    bool operator==(const CheckSpec&) const = default;
};

/// A complete, self-describing experiment. Exactly one command block is set.
struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string command;  ///< simulate | sweep | scaling | baseline | ess | check
    std::string description;
    std::uint64_t seed = 0;
    int trials = 1;
    ReferenceSpec reference;
    MetricOptions metrics;
    std::vector<Variant> variants;
    std::optional<SweepSpec> sweep;
    std::optional<ScalingSpec> scaling;
    std::optional<BaselineSpec> baseline;
    std::optional<EssSpec> ess;
    std::optional<CheckSpec> check;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys anywhere raise one ConfigError naming all of them.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Canonical form; parse(serialize(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& c);

nlohmann::json loop_to_json(const LoopConfig& c);
LoopConfig loop_from_json(const nlohmann::json& j);

/// Reads a config file, or the embedded config of a run manifest.
ExperimentConfig load_config(const std::string& path);

/// FNV-1a 64 of the canonical (sorted-key, compact) JSON text.
std::uint64_t config_digest(const ExperimentConfig& c);
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

} // namespace madloop
