#include "madloop/config.hpp"

#include "madloop/errors.hpp"
#include "madloop/gmm.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace madloop {

using nlohmann::json;

namespace {

// Tracks which keys of an object were consumed so leftovers can be reported.
class Reader {
public:
    Reader(const json& j, std::string path, std::vector<std::string>& unknown)
        : j_(j), path_(std::move(path)), unknown_(unknown) {
        if (!j_.is_object()) {
            throw ConfigError(where() + " must be an object");
        }
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;
    ~Reader() = default;

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) {
            return fallback;
        }
        return convert<T>(raw(key), key);
    }

    template <typename T>
    T require(const std::string& key) {
        if (!has(key)) {
            throw ConfigError("missing required key '" + path_ + key + "'");
        }
        return convert<T>(raw(key), key);
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key) || j_.at(key).is_null()) {
            if (has(key)) {
                seen_.insert(key);
            }
            return std::nullopt;
        }
        return convert<T>(raw(key), key);
    }

    std::string child_path(const std::string& key) const { return path_ + key + "."; }

    void finish() {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                unknown_.push_back(path_ + it.key());
            }
        }
    }

private:
    std::string where() const { return path_.empty() ? std::string("config") : path_.substr(0, path_.size() - 1); }

    template <typename T>
    T convert(const json& v, const std::string& key) {
        try {
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                    throw ConfigError("negative");
                }
            }
            if constexpr (std::is_arithmetic_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number()) {
                    throw ConfigError("not a number");
                }
                if constexpr (std::is_integral_v<T>) {
                    if (!v.is_number_integer()) {
                        throw ConfigError("not an integer");
                    }
                }
            }
            return v.get<T>();
        } catch (const std::exception& e) {
            throw ConfigError("invalid value for '" + path_ + key + "': " + e.what());
        }
    }

    const json& j_;
    std::string path_;
    std::vector<std::string>& unknown_;
    std::set<std::string> seen_;
};

ModelFamily family_from(const std::string& name, int components) {
    if (name == "gaussian") {
        if (components != 1) {
            throw ConfigError("family 'gaussian' takes components = 1");
        }
        return ModelFamily::gaussian();
    }
    if (name == "gmm") {
        return ModelFamily::gmm(components);
    }
    throw ConfigError("unknown model family '" + name + "'");
}

LoopConfig parse_loop(const json& j, const std::string& path, std::vector<std::string>& unknown) {
    Reader r(j, path, unknown);
    LoopConfig c;
    c.loop_kind = loop_kind_from_string(r.require<std::string>("loop_kind"));
    c.family = family_from(r.get<std::string>("family", "gaussian"), r.get<int>("components", 1));
    c.n_ini = r.require<std::size_t>("n_ini");
    c.n_r = r.get<std::size_t>("n_r", 0);
    c.n_s = r.get<std::size_t>("n_s", 0);
    c.lambda = r.get<double>("lambda", 1.0);
    c.generations = r.require<int>("generations");
    c.memory_k = r.get<int>("memory_k", 1);
    c.accumulate_synthetic = r.get<bool>("accumulate_synthetic", false);
    c.p_fraction = r.optional<double>("p_fraction");
    c.total_n = r.optional<std::size_t>("total_n");
    r.finish();
    return c;
}

MetricOptions parse_metrics(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "metrics.", unknown);
    MetricOptions m;
    m.pr_stride = r.get<int>("pr_stride", m.pr_stride);
    m.eval_samples = r.get<std::size_t>("eval_samples", m.eval_samples);
    m.k = r.get<int>("k", m.k);
    m.modal_stride = r.get<int>("modal_stride", m.modal_stride);
    m.modal_reference_samples = r.get<std::size_t>("modal_reference_samples", m.modal_reference_samples);
    m.keep_models = r.get<bool>("keep_models", m.keep_models);
    r.finish();
    return m;
}

ReferenceSpec parse_reference(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "reference.", unknown);
    ReferenceSpec ref;
    ref.family = r.require<std::string>("family");
    ref.dim = r.get<int>("dim", 0);
    ref.mean = r.get<std::vector<double>>("mean", {});
    ref.cov = r.get<std::vector<std::vector<double>>>("cov", {});
    r.finish();
    return ref;
}

GenerationRule parse_rule(Reader& r) {
    GenerationRule rule;
    rule.min_generations = r.get<int>("min_generations", rule.min_generations);
    rule.time_constants = r.get<double>("time_constants", rule.time_constants);
    rule.max_doublings = r.get<int>("max_doublings", rule.max_doublings);
    return rule;
}

void write_rule(json& j, const GenerationRule& rule) {
    j["min_generations"] = rule.min_generations;
    j["time_constants"] = rule.time_constants;
    j["max_doublings"] = rule.max_doublings;
}

SweepSpec parse_sweep(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "sweep.", unknown);
    SweepSpec s;
    s.axes.n_r = r.require<std::vector<std::size_t>>("n_r");
    s.axes.n_s = r.require<std::vector<std::size_t>>("n_s");
    s.axes.lambda = r.require<std::vector<double>>("lambda");
    s.axes.memory_k = r.get<std::vector<int>>("memory_k", {1});
    s.rule = parse_rule(r);
    s.baseline_grid = r.get<std::vector<std::size_t>>("baseline_grid", {});
    s.baseline_trials = r.get<int>("baseline_trials", s.baseline_trials);
    r.finish();
    return s;
}

ScalingSpec parse_scaling(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "scaling.", unknown);
    ScalingSpec s;
    s.p = r.require<std::vector<double>>("p");
    s.total_n = r.require<std::vector<std::size_t>>("total_n");
    s.lambda = r.require<std::vector<double>>("lambda");
    s.rule = parse_rule(r);
    r.finish();
    return s;
}

BaselineSpec parse_baseline(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "baseline.", unknown);
    BaselineSpec s;
    s.grid = r.require<std::vector<std::size_t>>("grid");
    r.finish();
    return s;
}

EssSpec parse_ess(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "ess.", unknown);
    EssSpec s;
    s.loop = parse_loop(r.raw("loop"), "ess.loop.", unknown);
    s.baseline_grid = r.get<std::vector<std::size_t>>("baseline_grid", {});
    s.baseline_trials = r.get<int>("baseline_trials", s.baseline_trials);
    r.finish();
    return s;
}

CheckSpec parse_check(const json& j, std::vector<std::string>& unknown) {
    Reader r(j, "check.", unknown);
    CheckSpec s;
    s.kind = r.get<std::string>("kind", s.kind);
    s.dims = r.get<std::vector<int>>("dims", s.dims);
    s.lambda = r.get<std::vector<double>>("lambda", s.lambda);
    s.n_s = r.get<std::size_t>("n_s", s.n_s);
    r.finish();
    return s;
}

std::string joined(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
        out += out.empty() ? s : ", " + s;
    }
    return out;
}

const std::set<std::string> kCommands{"simulate", "sweep", "scaling", "baseline", "ess", "check"};

} // namespace

Model ReferenceSpec::build() const {
    if (family == "grid25") {
        if (dim != 0 && dim != 2) {
            throw ConfigError("grid25 reference is two-dimensional");
        }
        return reference_grid_gmm();
    }
    return gaussian();
}

GaussianParams ReferenceSpec::gaussian() const {
    if (family != "gaussian") {
        throw ConfigError("reference family '" + family + "' is not Gaussian");
    }
    if (mean.empty() && cov.empty()) {
        if (dim < 1) {
            throw ConfigError("Gaussian reference needs dim >= 1 or an explicit mean and cov");
        }
        return GaussianParams::standard(dim);
    }
    const auto d = static_cast<Eigen::Index>(mean.size());
    if (dim != 0 && dim != d) {
        throw ConfigError("reference dim does not match the mean");
    }
    if (static_cast<Eigen::Index>(cov.size()) != d) {
        throw ConfigError("reference cov must be " + std::to_string(d) + " x " + std::to_string(d));
    }
    Eigen::VectorXd mu(d);
    Eigen::MatrixXd sigma(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
        mu(a) = mean[static_cast<std::size_t>(a)];
        const auto& row = cov[static_cast<std::size_t>(a)];
        if (static_cast<Eigen::Index>(row.size()) != d) {
            throw ConfigError("reference cov must be square");
        }
        for (Eigen::Index b = 0; b < d; ++b) {
            sigma(a, b) = row[static_cast<std::size_t>(b)];
        }
    }
    try {
        return GaussianParams(mu, sigma);
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid reference: ") + e.what());
    }
}

void ExperimentConfig::validate() const {
    if (schema_version != kSchemaVersion) {
        throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
    }
    if (!kCommands.count(command)) {
        throw ConfigError("unknown command '" + command + "'");
    }
    if (trials < 1) {
        throw ConfigError("trials must be >= 1");
    }
    if (reference.family != "gaussian" && reference.family != "grid25") {
        throw ConfigError("unknown reference family '" + reference.family + "'");
    }
    const Model ref = reference.build();
    if (metrics.k < 1 || metrics.pr_stride < 0 || metrics.modal_stride < 0) {
        throw ConfigError("metrics: k must be >= 1 and strides >= 0");
    }
    if ((metrics.pr_stride > 0 || metrics.modal_stride > 0) &&
        metrics.eval_samples <= static_cast<std::size_t>(metrics.k)) {
        throw ConfigError("metrics.eval_samples must exceed k");
    }
    const int blocks = !variants.empty() + sweep.has_value() + scaling.has_value() + baseline.has_value() +
                       ess.has_value() + check.has_value();
    if (blocks != 1) {
        throw ConfigError("exactly one command block must be present (found " + std::to_string(blocks) + ")");
    }
    auto need = [&](bool present, const char* block) {
        if (!present) {
            throw ConfigError("command '" + command + "' needs the '" + block + "' block");
        }
    };
    auto need_gaussian = [&] { (void)reference.gaussian(); };
    if (command == "simulate") {
        need(!variants.empty(), "variants");
        std::set<std::string> names;
        for (const auto& v : variants) {
            if (v.name.empty() || v.name.find_first_of("/\\.") != std::string::npos) {
                throw ConfigError("variant names must be non-empty and free of '/', '\\\\' and '.'");
            }
            if (!names.insert(v.name).second) {
                throw ConfigError("duplicate variant name '" + v.name + "'");
            }
            v.loop.validate();
        }
    } else if (command == "sweep") {
        need(sweep.has_value(), "sweep");
        need_gaussian();
        if (sweep->axes.n_r.empty() || sweep->axes.n_s.empty() || sweep->axes.lambda.empty() ||
            sweep->axes.memory_k.empty()) {
            throw ConfigError("sweep axes must be non-empty");
        }
        if (std::any_of(sweep->axes.n_r.begin(), sweep->axes.n_r.end(), [](std::size_t n) { return n == 0; })) {
            throw ConfigError("sweep n_r values must be >= 1");
        }
        if (trials < 2) {
            throw ConfigError("sweep needs trials >= 2");
        }
    } else if (command == "scaling") {
        need(scaling.has_value(), "scaling");
        need_gaussian();
        if (trials < 2) {
            throw ConfigError("scaling needs trials >= 2");
        }
    } else if (command == "baseline") {
        need(baseline.has_value(), "baseline");
        need_gaussian();
    } else if (command == "ess") {
        need(ess.has_value(), "ess");
        need_gaussian();
        ess->loop.validate();
        if (ess->loop.loop_kind != LoopKind::fresh_data) {
            throw ConfigError("ess needs a fresh_data loop");
        }
    } else if (command == "check") {
        need(check.has_value(), "check");
        if (check->kind != "martingale" && check->kind != "trace") {
            throw ConfigError("check.kind must be 'martingale' or 'trace'");
        }
    }
    (void)ref;
}

nlohmann::json loop_to_json(const LoopConfig& c) {
    json j;
    j["loop_kind"] = to_string(c.loop_kind);
    j["family"] = c.family.kind == ModelFamily::Kind::gaussian ? "gaussian" : "gmm";
    j["components"] = c.family.components;
    j["n_ini"] = c.n_ini;
    j["n_r"] = c.n_r;
    j["n_s"] = c.n_s;
    j["lambda"] = c.lambda;
    j["generations"] = c.generations;
    j["memory_k"] = c.memory_k;
    j["accumulate_synthetic"] = c.accumulate_synthetic;
    if (c.p_fraction) {
        j["p_fraction"] = *c.p_fraction;
    }
    if (c.total_n) {
        j["total_n"] = *c.total_n;
    }
    return j;
}

LoopConfig loop_from_json(const nlohmann::json& j) {
    std::vector<std::string> unknown;
    LoopConfig c = parse_loop(j, "", unknown);
    if (!unknown.empty()) {
        throw ConfigError("unknown config keys: " + joined(unknown));
    }
    return c;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    std::vector<std::string> unknown;
    ExperimentConfig c;
    {
        Reader r(j, "", unknown);
        c.schema_version = r.require<int>("schema_version");
        c.command = r.require<std::string>("command");
        c.description = r.get<std::string>("description", "");
        c.seed = r.require<std::uint64_t>("seed");
        c.trials = r.get<int>("trials", 1);
        c.reference = parse_reference(r.raw("reference"), unknown);
        if (r.has("metrics")) {
            c.metrics = parse_metrics(r.raw("metrics"), unknown);
        }
        if (r.has("variants")) {
            const json& vs = r.raw("variants");
            if (!vs.is_array()) {
                throw ConfigError("variants must be an array");
            }
            for (std::size_t i = 0; i < vs.size(); ++i) {
                const std::string path = "variants[" + std::to_string(i) + "].";
                Reader vr(vs[i], path, unknown);
                Variant v;
                v.name = vr.require<std::string>("name");
                v.loop = parse_loop(vr.raw("loop"), path + "loop.", unknown);
                vr.finish();
                c.variants.push_back(std::move(v));
            }
        }
        if (r.has("sweep")) {
            c.sweep = parse_sweep(r.raw("sweep"), unknown);
        }
        if (r.has("scaling")) {
            c.scaling = parse_scaling(r.raw("scaling"), unknown);
        }
        if (r.has("baseline")) {
            c.baseline = parse_baseline(r.raw("baseline"), unknown);
        }
        if (r.has("ess")) {
            c.ess = parse_ess(r.raw("ess"), unknown);
        }
        if (r.has("check")) {
            c.check = parse_check(r.raw("check"), unknown);
        }
        r.finish();
    }
    if (!unknown.empty()) {
        throw ConfigError("unknown config keys: " + joined(unknown));
    }
    c.validate();
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["command"] = c.command;
    if (!c.description.empty()) {
        j["description"] = c.description;
    }
    j["seed"] = c.seed;
    j["trials"] = c.trials;

    json ref;
    ref["family"] = c.reference.family;
    if (c.reference.dim != 0) {
        ref["dim"] = c.reference.dim;
    }
    if (!c.reference.mean.empty()) {
        ref["mean"] = c.reference.mean;
    }
    if (!c.reference.cov.empty()) {
        ref["cov"] = c.reference.cov;
    }
    j["reference"] = ref;

    j["metrics"] = {{"pr_stride", c.metrics.pr_stride},
                    {"eval_samples", c.metrics.eval_samples},
                    {"k", c.metrics.k},
                    {"modal_stride", c.metrics.modal_stride},
                    {"modal_reference_samples", c.metrics.modal_reference_samples},
                    {"keep_models", c.metrics.keep_models}};

    if (!c.variants.empty()) {
        json vs = json::array();
        for (const auto& v : c.variants) {
            vs.push_back({{"name", v.name}, {"loop", loop_to_json(v.loop)}});
        }
        j["variants"] = vs;
    }
    if (c.sweep) {
        json s{{"n_r", c.sweep->axes.n_r},
               {"n_s", c.sweep->axes.n_s},
               {"lambda", c.sweep->axes.lambda},
               {"memory_k", c.sweep->axes.memory_k},
               {"baseline_grid", c.sweep->baseline_grid},
               {"baseline_trials", c.sweep->baseline_trials}};
        write_rule(s, c.sweep->rule);
        j["sweep"] = s;
    }
    if (c.scaling) {
        json s{{"p", c.scaling->p}, {"total_n", c.scaling->total_n}, {"lambda", c.scaling->lambda}};
        write_rule(s, c.scaling->rule);
        j["scaling"] = s;
    }
    if (c.baseline) {
        j["baseline"] = {{"grid", c.baseline->grid}};
    }
    if (c.ess) {
        j["ess"] = {{"loop", loop_to_json(c.ess->loop)},
                    {"baseline_grid", c.ess->baseline_grid},
                    {"baseline_trials", c.ess->baseline_trials}};
    }
    if (c.check) {
        j["check"] = {{"kind", c.check->kind},
                      {"dims", c.check->dims},
                      {"lambda", c.check->lambda},
                      {"n_s", c.check->n_s}};
    }
    return j;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("manifest_version")) {
        if (!j.contains("config")) {
            throw ConfigError("manifest '" + path + "' has no embedded config");
        }
        return config_from_json(j.at("config"));
    }
    return config_from_json(j);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_digest(const ExperimentConfig& c) {
    return fnv1a64(config_to_json(c).dump());
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace madloop
