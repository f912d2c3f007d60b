#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "rydberg_id/basis.hpp"
#include "rydberg_id/datagen.hpp"
#include "rydberg_id/dynamics.hpp"
#include "rydberg_id/evaluation.hpp"

namespace rydberg_id {

inline constexpr const char* kCodeVersion = "rydberg-id 0.1.0";
inline constexpr const char* kSeedEnvironmentVariable = "RYDBERG_ID_SEED";

enum class AblationAxis { None, InteractionMode, NoiseLevel, TotalTime, ObserveEvery };

inline std::string to_string(AblationAxis a) {
    switch (a) {
        case AblationAxis::None: return "none";
        case AblationAxis::InteractionMode: return "interaction-mode";
        case AblationAxis::NoiseLevel: return "noise-level";
        case AblationAxis::TotalTime: return "total-time";
        case AblationAxis::ObserveEvery: return "observe-every";
    }
    return "?";
}

inline AblationAxis parse_ablation_axis(std::string_view s) {
    for (auto a : {AblationAxis::None, AblationAxis::InteractionMode, AblationAxis::NoiseLevel, AblationAxis::TotalTime,
                   AblationAxis::ObserveEvery}) {
        if (to_string(a) == s) return a;
    }
    throw std::invalid_argument("unknown ablation axis: " + std::string(s));
}

inline std::vector<std::string> default_ablation_values(AblationAxis a) {
    switch (a) {
        case AblationAxis::InteractionMode: return {"NNN", "NN"};
        case AblationAxis::NoiseLevel: return {"0.03/0.01", "0.07/0.02", "0.10/0.05"};
        case AblationAxis::TotalTime: return {"0.25", "0.5", "0.75", "1.0"};
        case AblationAxis::ObserveEvery: return {"50", "100", "200", "250"};
        case AblationAxis::None: break;
    }
    return {};
}

struct TaskEntry {
    std::string label;  // "excitation:chain-5", "atom-count-linear", ...
    TaskSpec spec;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::vector<TaskEntry> tasks;
    std::vector<ModelKind> models{ModelKind::Svm, ModelKind::Forest};
    double test_fraction = 0.2;
    int cv_folds = 10;
    bool learning_curve = false;
    std::vector<long> lc_sizes;  // empty: default grid
    int lc_points = 10;
    AblationAxis ablation = AblationAxis::None;
    std::vector<std::string> ablation_values;
    std::string output;
    std::uint64_t seed = 20210728;
    std::map<std::string, std::string> source;  // the key/value pairs as read
};

// ---- config text -----------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(sep, start);
        const auto piece = trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
        if (!piece.empty()) out.push_back(piece);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw std::invalid_argument("config key '" + key + "': not a number: " + v);
    return x;
}

inline long parse_long(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long x = 0;
    try {
        x = std::stol(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw std::invalid_argument("config key '" + key + "': not an integer: " + v);
    return x;
}

inline std::uint64_t parse_seed(const std::string& what, const std::string& v) {
    std::size_t used = 0;
    std::uint64_t x = 0;
    try {
        x = std::stoull(v, &used, 0);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty() || v.front() == '-') throw std::invalid_argument(what + ": not a seed: " + v);
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw std::invalid_argument("config key '" + key + "': not a boolean: " + v);
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "name",        "task",          "configs",          "basis",        "mode",         "tasks",
        "samples_per_class", "total_time_us", "observe_every_ns", "step_ns", "seed", "rabi_mhz",
        "c6_ghz_um6",  "dephasing_mhz", "decay_mhz",        "noise_mean",   "noise_std",    "models",
        "test_fraction", "cv_folds",    "learning_curve",   "lc_sizes",     "lc_points",    "ablation",
        "ablation_values", "output"};
    return keys;
}

inline TaskEntry make_entry(const std::string& kind_text, const std::vector<std::string>& configs, const TaskSpec& base) {
    TaskEntry e;
    e.spec = base;
    e.spec.kind = parse_task_kind(kind_text);
    e.spec.basis = default_basis(e.spec.kind);
    e.spec.configurations = configs.empty() ? default_configurations(e.spec.kind) : configs;
    if (e.spec.configurations.empty()) throw std::invalid_argument("task '" + kind_text + "' needs configurations");
    e.label = kind_text;
    if (!configs.empty() && (e.spec.kind == TaskKind::Excitation || e.spec.kind == TaskKind::Combined)) {
        e.label += ":";
        for (std::size_t i = 0; i < configs.size(); ++i) e.label += (i ? "+" : "") + configs[i];
    }
    return e;
}

}  // namespace detail

/// Reads `key = value` lines; `#` starts a comment. Unknown and repeated keys are errors.
inline std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& origin = "config") {
    std::map<std::string, std::string> kv;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(number) + ": expected 'key = value'");
        }
        const auto key = detail::trim(std::string_view(body).substr(0, eq));
        const auto value = detail::trim(std::string_view(body).substr(eq + 1));
        if (!detail::known_keys().contains(key)) {
            throw std::invalid_argument(origin + ":" + std::to_string(number) + ": unknown key '" + key + "'");
        }
        if (!kv.emplace(key, value).second) {
            throw std::invalid_argument(origin + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

inline void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    for (auto& t : cfg.tasks) t.spec.seed = seed;
}

/// Checks every invariant the runner relies on, so bad configs fail before any simulation.
inline void validate(const ExperimentConfig& cfg) {
    if (cfg.tasks.empty()) throw std::invalid_argument("experiment has no tasks");
    if (cfg.models.empty()) throw std::invalid_argument("experiment has no models");
    if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0) throw std::invalid_argument("test_fraction must be in (0,1)");
    if (cfg.cv_folds < 2) throw std::invalid_argument("cv_folds must be at least 2");
    for (const auto& t : cfg.tasks) {
        for (const auto& c : t.spec.configurations) {
            if (!is_catalog_configuration(c)) throw std::invalid_argument("unknown configuration '" + c + "'");
        }
        validate(t.spec.hamiltonian);
        validate(t.spec.noise);
        t.spec.grid.check();
        if (t.spec.samples_per_class < 2) throw std::invalid_argument("samples_per_class must be at least 2");
        const double test = t.spec.samples_per_class * cfg.test_fraction;
        if (std::abs(test - std::round(test)) > 1e-9) {
            throw std::invalid_argument("samples_per_class * test_fraction must be an integer");
        }
    }
    for (const auto& v : cfg.ablation_values) {
        switch (cfg.ablation) {
            case AblationAxis::None: throw std::invalid_argument("ablation_values given without an ablation axis");
            case AblationAxis::InteractionMode: parse_interaction_mode(v); break;
            case AblationAxis::NoiseLevel: {
                const auto parts = detail::split(v, '/');
                if (parts.size() != 2) throw std::invalid_argument("noise level must be 'mean/std': " + v);
                const double m = detail::parse_double("ablation_values", parts[0]);
                const double s = detail::parse_double("ablation_values", parts[1]);
                if (m < 0.0 || s < 0.0) throw std::invalid_argument("noise level must be non-negative: " + v);
                break;
            }
            case AblationAxis::TotalTime:
            case AblationAxis::ObserveEvery: {
                const double x = detail::parse_double("ablation_values", v);
                for (const auto& t : cfg.tasks) {
                    TimeGrid g = t.spec.grid;
                    if (cfg.ablation == AblationAxis::TotalTime) {
                        g.total = x;
                    } else {
                        g.observe_every = x * 1e-3;
                    }
                    g.check();
                    const double stride = g.observe_every / t.spec.grid.observe_every;
                    if (std::abs(stride - std::round(stride)) > 1e-9) {
                        throw std::invalid_argument("ablation value " + v + " is not a multiple of the base spacing");
                    }
                }
                break;
            }
        }
    }
}

/// Builds an ExperimentConfig from parsed key/value pairs.
inline ExperimentConfig make_experiment_config(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    cfg.source = kv;
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = kv.find(k);
        return it == kv.end() ? std::nullopt : std::optional<std::string>(it->second);
    };

    if (auto v = get("name")) cfg.name = *v;
    if (auto v = get("seed")) cfg.seed = detail::parse_seed("config key 'seed'", *v);

    TaskSpec base;
    base.seed = cfg.seed;
    if (auto v = get("mode")) base.hamiltonian.mode = parse_interaction_mode(*v);
    if (auto v = get("rabi_mhz")) base.hamiltonian.omega = kTwoPi * detail::parse_double("rabi_mhz", *v);
    if (auto v = get("c6_ghz_um6")) base.hamiltonian.c6 = kTwoPi * 1e3 * detail::parse_double("c6_ghz_um6", *v);
    if (auto v = get("dephasing_mhz")) base.noise.base_dephasing = kTwoPi * detail::parse_double("dephasing_mhz", *v);
    if (auto v = get("decay_mhz")) base.noise.base_decay = kTwoPi * detail::parse_double("decay_mhz", *v);
    if (auto v = get("noise_mean")) base.noise.intensity_mean = detail::parse_double("noise_mean", *v);
    if (auto v = get("noise_std")) base.noise.intensity_std = detail::parse_double("noise_std", *v);
    if (auto v = get("samples_per_class")) base.samples_per_class = static_cast<int>(detail::parse_long("samples_per_class", *v));
    if (auto v = get("total_time_us")) base.grid.total = detail::parse_double("total_time_us", *v);
    if (auto v = get("observe_every_ns")) base.grid.observe_every = 1e-3 * detail::parse_double("observe_every_ns", *v);
    if (auto v = get("step_ns")) base.grid.step = 1e-3 * detail::parse_double("step_ns", *v);

    if (auto v = get("tasks")) {
        if (get("task") || get("configs")) throw std::invalid_argument("use either 'tasks' or 'task'/'configs', not both");
        for (const auto& item : detail::split(*v, ';')) {
            const auto colon = item.find(':');
            const auto kind = detail::trim(item.substr(0, colon));
            const auto configs = colon == std::string::npos ? std::vector<std::string>{}
                                                             : detail::split(item.substr(colon + 1), '+');
            cfg.tasks.push_back(detail::make_entry(kind, configs, base));
        }
    } else {
        const auto kind = get("task").value_or("excitation");
        const auto configs = get("configs") ? detail::split(*get("configs"), ',') : std::vector<std::string>{};
        cfg.tasks.push_back(detail::make_entry(kind, configs, base));
    }
    if (auto v = get("basis")) {
        for (auto& t : cfg.tasks) t.spec.basis = parse_basis_selection(*v);
    }

    if (auto v = get("models")) {
        cfg.models.clear();
        for (const auto& m : detail::split(*v, ',')) {
            if (m == "both") {
                cfg.models = {ModelKind::Svm, ModelKind::Forest};
            } else {
                cfg.models.push_back(parse_model_kind(m));
            }
        }
    }
    if (auto v = get("test_fraction")) cfg.test_fraction = detail::parse_double("test_fraction", *v);
    if (auto v = get("cv_folds")) cfg.cv_folds = static_cast<int>(detail::parse_long("cv_folds", *v));
    if (auto v = get("learning_curve")) cfg.learning_curve = detail::parse_bool("learning_curve", *v);
    if (auto v = get("lc_sizes")) {
        for (const auto& s : detail::split(*v, ',')) cfg.lc_sizes.push_back(detail::parse_long("lc_sizes", s));
    }
    if (auto v = get("lc_points")) cfg.lc_points = static_cast<int>(detail::parse_long("lc_points", *v));
    if (auto v = get("ablation")) cfg.ablation = parse_ablation_axis(*v);
    if (auto v = get("ablation_values")) cfg.ablation_values = detail::split(*v, ',');
    if (cfg.ablation != AblationAxis::None && cfg.ablation_values.empty()) {
        cfg.ablation_values = default_ablation_values(cfg.ablation);
    }
    cfg.output = get("output").value_or("results/" + cfg.name);
    validate(cfg);
    return cfg;
}

inline ExperimentConfig parse_experiment_config(std::istream& in, const std::string& origin = "config") {
    return make_experiment_config(read_key_values(in, origin));
}

/// Applies RYDBERG_ID_SEED when it is set.
inline void apply_environment(ExperimentConfig& cfg) {
    if (const char* env = std::getenv(kSeedEnvironmentVariable); env && *env) {
        set_seed(cfg, detail::parse_seed(kSeedEnvironmentVariable, env));
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    auto cfg = parse_experiment_config(in, path);
    apply_environment(cfg);
    return cfg;
}

// ---- numerical diagnostics -------------------------------------------------

struct NumericsCheck {
    double trace_drift = 0.0;
    double hermiticity = 0.0;
    double min_eigenvalue = 1.0;
    double step_halving = 0.0;  // max |P_W(dt) - P_W(dt/2)| over catalog states and grid points

    void merge(const NumericsCheck& o) {
        trace_drift = std::max(trace_drift, o.trace_drift);
        hermiticity = std::max(hermiticity, o.hermiticity);
        min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
        step_halving = std::max(step_halving, o.step_halving);
    }
};

inline NumericsCheck check_numerics(const AtomConfiguration& config, const HamiltonianParams& hp,
                                    const NoiseRealization& noise, const TimeGrid& grid) {
    const RydbergPropagator prop(config, hp);
    const auto catalog = build_basis_catalog(config, hp.blockade_radius());
    TimeGrid fine = grid;
    fine.step = grid.step / 2.0;
    const auto coarse = prop.trajectory(noise, grid);
    const auto halved = prop.trajectory(noise, fine);
    NumericsCheck c;
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        const auto& rho = coarse[k];
        c.trace_drift = std::max(c.trace_drift, std::abs(rho.trace() - Complex(1.0, 0.0)));
        c.hermiticity = std::max(c.hermiticity, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
        const Eigen::SelfAdjointEigenSolver<DensityMatrix> eig(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
        c.min_eigenvalue = std::min(c.min_eigenvalue, eig.eigenvalues().minCoeff());
        for (const auto& w : catalog.states) {
            c.step_halving = std::max(c.step_halving, std::abs(probability(rho, w) - probability(halved[k], w)));
        }
    }
    return c;
}

inline nlohmann::json to_json(const NumericsCheck& c) {
    return {{"max_trace_drift", c.trace_drift},
            {"max_hermiticity_residual", c.hermiticity},
            {"min_eigenvalue", c.min_eigenvalue},
            {"max_step_halving_change", c.step_halving}};
}

// ---- running ---------------------------------------------------------------

struct RunOptions {
    int jobs = 1;
    ProfileCache* cache = nullptr;
    bool write_artifacts = true;
    std::optional<bool> learning_curve;  // overrides the config when set
    bool ablation = true;
    bool numerics = true;
};

struct ModelResult {
    ModelKind kind = ModelKind::Svm;
    ConfusionMatrix confusion;
    ConfidenceInterval ci;
    std::vector<LearningCurvePoint> learning_curve;
    std::optional<TrainedModel> model;

    [[nodiscard]] double accuracy() const { return confusion.accuracy(); }
};

struct TaskResult {
    std::string label;
    TaskSpec spec;
    std::vector<std::string> class_names;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<ModelResult> models;

    [[nodiscard]] const ModelResult& model(ModelKind k) const {
        for (const auto& m : models) {
            if (m.kind == k) return m;
        }
        throw std::out_of_range("task " + label + " has no " + to_string(k) + " result");
    }
};

struct AblationRow {
    std::string value;
    std::string task;
    ModelKind model = ModelKind::Svm;
    ConfusionMatrix confusion;
    ConfidenceInterval ci;

    [[nodiscard]] double accuracy() const { return confusion.accuracy(); }
};

struct ExperimentReport {
    std::string name;
    std::uint64_t seed = 0;
    AblationAxis ablation = AblationAxis::None;
    std::vector<TaskResult> tasks;
    std::vector<AblationRow> ablation_rows;
    std::map<std::string, NumericsCheck> numerics;  // keyed by "configuration/mode"
    NumericsCheck numerics_overall;
    std::map<std::string, std::string> source;

    [[nodiscard]] const TaskResult& task(const std::string& label) const {
        for (const auto& t : tasks) {
            if (t.label == label) return t;
        }
        throw std::out_of_range("report has no task " + label);
    }
    [[nodiscard]] double ablation_accuracy(const std::string& value, const std::string& task, ModelKind m) const {
        for (const auto& r : ablation_rows) {
            if (r.value == value && r.task == task && r.model == m) return r.accuracy();
        }
        throw std::out_of_range("no ablation row " + value + "/" + task + "/" + to_string(m));
    }
};

namespace detail {

inline std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) { return derive_seed(master, hash_key(stage)); }

inline ModelHyperparameters model_hyperparameters(std::uint64_t master, int jobs) {
    ModelHyperparameters hp;
    hp.svm.seed = stage_seed(master, "svm");
    hp.forest.seed = stage_seed(master, "rfc");
    hp.jobs = jobs;
    return hp;
}

inline std::string slug(std::string s) {
    for (char& c : s) {
        if (c == ':' || c == '+' || c == '/' || c == ' ') c = '_';
    }
    return s;
}

inline std::vector<std::pair<ConfusionMatrix, ModelKind>> fit_and_score(const Dataset& ds, const std::vector<ModelKind>& models,
                                                                        double test_fraction, std::uint64_t seed, int jobs) {
    auto [train, test] = stratified_split(ds, test_fraction, stage_seed(seed, "split"));
    const auto hp = model_hyperparameters(seed, jobs);
    std::vector<std::pair<ConfusionMatrix, ModelKind>> out;
    for (auto k : models) out.emplace_back(confusion_matrix(train_model(k, train, hp), test), k);
    return out;
}

}  // namespace detail

/// generate -> split -> scale -> train -> evaluate (-> learning curve) for one task.
inline TaskResult run_task(const TaskEntry& entry, const ExperimentConfig& cfg, const RunOptions& opt, bool learning_curve,
                           Dataset* dataset_out = nullptr) {
    TaskResult r;
    r.label = entry.label;
    r.spec = entry.spec;
    Dataset ds;
    try {
        ds = generate_dataset(entry.spec, {opt.jobs, opt.cache});
    } catch (const std::exception& e) {
        throw std::runtime_error("experiment " + cfg.name + ", task " + entry.label + ": " + e.what());
    }
    r.class_names = ds.class_names;
    auto [train, test] = stratified_split(ds, cfg.test_fraction, detail::stage_seed(entry.spec.seed, "split"));
    r.train_size = train.size();
    r.test_size = test.size();
    const auto hp = detail::model_hyperparameters(entry.spec.seed, opt.jobs);
    for (auto kind : cfg.models) {
        ModelResult m;
        m.kind = kind;
        auto model = train_model(kind, train, hp);
        m.confusion = confusion_matrix(model, test);
        m.ci = agresti_coull(m.confusion.correct(), m.confusion.total());
        if (learning_curve) {
            const auto sizes = cfg.lc_sizes.empty()
                                   ? default_size_grid(static_cast<long>(ds.size()), cfg.lc_points)
                                   : cfg.lc_sizes;
            m.learning_curve = cross_validate(train, kind, cfg.cv_folds, sizes, hp, detail::stage_seed(entry.spec.seed, "cv"),
                                              1.0 - cfg.test_fraction);
        }
        m.model = std::move(model);
        r.models.push_back(std::move(m));
    }
    if (dataset_out) *dataset_out = std::move(ds);
    return r;
}

/// One row per (axis value, task, model). Seeds and sample partitions are the
/// same on every row; only the ablated quantity changes.
inline std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, AblationAxis axis, std::vector<std::string> values,
                                             const RunOptions& opt) {
    if (axis == AblationAxis::None) return {};
    if (values.empty()) values = default_ablation_values(axis);
    ExperimentConfig checked = cfg;
    checked.ablation = axis;
    checked.ablation_values = values;
    validate(checked);

    std::vector<AblationRow> rows;
    auto record = [&](const std::string& value, const std::string& task, const Dataset& ds, std::uint64_t seed) {
        for (auto& [cm, kind] : detail::fit_and_score(ds, cfg.models, cfg.test_fraction, seed, opt.jobs)) {
            rows.push_back({value, task, kind, cm, agresti_coull(cm.correct(), cm.total())});
        }
    };

    for (const auto& entry : cfg.tasks) {
        const auto& spec = entry.spec;
        if (axis == AblationAxis::TotalTime || axis == AblationAxis::ObserveEvery) {
            TaskSpec base = spec;
            if (axis == AblationAxis::TotalTime) {
                double longest = 0.0;
                for (const auto& v : values) longest = std::max(longest, detail::parse_double("ablation_values", v));
                base.grid.total = longest;
            }
            const auto full = generate_dataset(base, {opt.jobs, opt.cache});
            for (const auto& v : values) {
                TimeGrid g = base.grid;
                if (axis == AblationAxis::TotalTime) {
                    g.total = detail::parse_double("ablation_values", v);
                } else {
                    g.observe_every = 1e-3 * detail::parse_double("ablation_values", v);
                }
                record(v, entry.label, resample_grid(full, base.grid, g), spec.seed);
            }
            continue;
        }
        for (const auto& v : values) {
            TaskSpec s = spec;
            if (axis == AblationAxis::InteractionMode) {
                s.hamiltonian.mode = parse_interaction_mode(v);
            } else {
                const auto parts = detail::split(v, '/');
                s.noise.intensity_mean = detail::parse_double("ablation_values", parts.at(0));
                s.noise.intensity_std = detail::parse_double("ablation_values", parts.at(1));
            }
            record(v, entry.label, generate_dataset(s, {opt.jobs, opt.cache}), spec.seed);
        }
    }
    return rows;
}

/// Integrator diagnostics for every (configuration, mode) the experiment
/// simulates, at the nominal realization and at the first sampled one.
inline std::map<std::string, NumericsCheck> experiment_numerics(const ExperimentConfig& cfg) {
    std::vector<TaskSpec> variants;
    for (const auto& t : cfg.tasks) {
        variants.push_back(t.spec);
        if (cfg.ablation == AblationAxis::InteractionMode) {
            for (const auto& v : cfg.ablation_values) {
                TaskSpec s = t.spec;
                s.hamiltonian.mode = parse_interaction_mode(v);
                variants.push_back(s);
            }
        } else if (cfg.ablation == AblationAxis::NoiseLevel) {
            for (const auto& v : cfg.ablation_values) {
                TaskSpec s = t.spec;
                const auto parts = detail::split(v, '/');
                s.noise.intensity_mean = detail::parse_double("ablation_values", parts.at(0));
                s.noise.intensity_std = detail::parse_double("ablation_values", parts.at(1));
                variants.push_back(s);
            }
        }
    }
    std::map<std::string, NumericsCheck> out;
    std::set<std::string> seen;
    for (const auto& s : variants) {
        for (const auto& label : s.configurations) {
            std::ostringstream key;
            key.precision(17);
            key << label << '|' << to_string(s.hamiltonian.mode) << '|' << s.noise.intensity_mean << '|'
                << s.noise.intensity_std << '|' << s.grid.total;
            if (!seen.insert(key.str()).second) continue;
            const auto config = configuration_by_name(label);
            auto rng = make_stream(sample_seed(s.seed, ClassInfo{label, 0, ""}, 0));
            auto check = check_numerics(config, s.hamiltonian, nominal_noise(s.noise), s.grid);
            check.merge(check_numerics(config, s.hamiltonian, sample_noise(s.noise, rng), s.grid));
            out[label + "/" + to_string(s.hamiltonian.mode)].merge(check);
        }
    }
    return out;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) { return cm.counts; }

inline nlohmann::json to_json(const ConfidenceInterval& ci) {
    return {{"method", "agresti-coull"}, {"z", ci.z}, {"center", ci.estimate}, {"lower", ci.lower}, {"upper", ci.upper}};
}

inline nlohmann::json to_json(const ExperimentReport& r) {
    nlohmann::json j{{"format", "rydberg-id-report"},
                     {"version", 1},
                     {"name", r.name},
                     {"provenance", {{"code_version", kCodeVersion}, {"seed", r.seed}, {"config", r.source}}}};
    auto& tasks = j["tasks"] = nlohmann::json::array();
    for (const auto& t : r.tasks) {
        nlohmann::json jt{{"label", t.label},
                          {"task", to_json(t.spec)},
                          {"classes", t.class_names},
                          {"train_samples", t.train_size},
                          {"test_samples", t.test_size}};
        auto& models = jt["models"] = nlohmann::json::array();
        for (const auto& m : t.models) {
            nlohmann::json jm{{"model", to_string(m.kind)},
                              {"accuracy", m.accuracy()},
                              {"correct", m.confusion.correct()},
                              {"total", m.confusion.total()},
                              {"ci", to_json(m.ci)},
                              {"confusion", to_json(m.confusion)}};
            if (!m.learning_curve.empty()) {
                auto& lc = jm["learning_curve"] = {
                    {"note", "total_samples is N generated; training_samples (the training share of N) is k-fold cross-validated"},
                    {"points", nlohmann::json::array()}};
                for (const auto& p : m.learning_curve) {
                    lc["points"].push_back({{"total_samples", p.total_samples},
                                            {"training_samples", p.training_samples},
                                            {"mean", p.mean},
                                            {"std", p.std}});
                }
            }
            models.push_back(std::move(jm));
        }
        tasks.push_back(std::move(jt));
    }
    if (r.ablation != AblationAxis::None) {
        auto& ab = j["ablation"] = {{"axis", to_string(r.ablation)}, {"rows", nlohmann::json::array()}};
        for (const auto& row : r.ablation_rows) {
            ab["rows"].push_back({{"value", row.value},
                                  {"task", row.task},
                                  {"model", to_string(row.model)},
                                  {"accuracy", row.accuracy()},
                                  {"correct", row.confusion.correct()},
                                  {"total", row.confusion.total()},
                                  {"ci", to_json(row.ci)}});
        }
    }
    if (!r.numerics.empty()) {
        auto& nj = j["numerics"] = {{"overall", to_json(r.numerics_overall)}, {"per_configuration", nlohmann::json::object()}};
        for (const auto& [k, v] : r.numerics) nj["per_configuration"][k] = to_json(v);
    }
    return j;
}

inline void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "true\\predicted";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (int i = 0; i < cm.classes(); ++i) {
        out << names.at(static_cast<std::size_t>(i));
        for (long c : cm.counts[static_cast<std::size_t>(i)]) out << ',' << c;
        out << '\n';
    }
}

inline void write_report(const ExperimentReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << to_json(r).dump(2) << '\n';
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    validate(cfg);
    ExperimentReport report;
    report.name = cfg.name;
    report.seed = cfg.seed;
    report.source = cfg.source;
    report.source["seed"] = std::to_string(cfg.seed);
    const bool lc = opt.learning_curve.value_or(cfg.learning_curve);
    const std::filesystem::path dir(cfg.output);
    if (opt.write_artifacts) std::filesystem::create_directories(dir);

    for (const auto& entry : cfg.tasks) {
        Dataset ds;
        auto result = run_task(entry, cfg, opt, lc, opt.write_artifacts ? &ds : nullptr);
        if (opt.write_artifacts) {
            const auto stem = detail::slug(entry.label);
            save_dataset(ds, (dir / (stem + ".csv")).string());
            for (const auto& m : result.models) {
                const auto base = stem + "-" + to_string(m.kind);
                write_confusion_csv(m.confusion, result.class_names, (dir / (base + "-confusion.csv")).string());
                save_model(*m.model, (dir / (base + "-model.json")).string());
            }
        }
        report.tasks.push_back(std::move(result));
    }
    if (opt.ablation && cfg.ablation != AblationAxis::None) {
        report.ablation = cfg.ablation;
        report.ablation_rows = run_ablation(cfg, cfg.ablation, cfg.ablation_values, opt);
    }
    if (opt.numerics) {
        report.numerics = experiment_numerics(cfg);
        for (const auto& [k, v] : report.numerics) report.numerics_overall.merge(v);
    }
    if (opt.write_artifacts) write_report(report, (dir / "report.json").string());
    return report;
}

// ---- plot data -------------------------------------------------------------

/// Fluctuation-free P_W(t) of every catalog state: nominal drive, base
/// dephasing and decay. Columns: t_us, then one per basis ID.
inline std::vector<std::vector<double>> state_profiles(const std::string& configuration, int points,
                                                       const HamiltonianParams& hp = {}, const NoiseParams& noise = {},
                                                       double total_us = 1.0) {
    if (points < 2) throw std::invalid_argument("profiles need at least 2 points");
    const auto config = configuration_by_name(configuration);
    const auto catalog = build_basis_catalog(config, hp.blockade_radius());
    const RydbergPropagator prop(config, hp);
    TimeGrid grid;
    grid.total = total_us;
    grid.observe_every = total_us / (points - 1);
    grid.check();
    std::vector<RydbergPropagator::Observable> obs;
    for (const auto& w : catalog.states) obs.push_back(prop.projector(w));
    const auto curves = prop.observe(nominal_noise(noise), grid, obs);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) {
        rows[static_cast<std::size_t>(k)].push_back(grid.time_at(k));
        for (const auto& c : curves) rows[static_cast<std::size_t>(k)].push_back(c[static_cast<std::size_t>(k)]);
    }
    return rows;
}

inline void emit_profiles(const std::string& configuration, int points, const std::string& path,
                          const HamiltonianParams& hp = {}, const NoiseParams& noise = {}) {
    const auto rows = state_profiles(configuration, points, hp, noise);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t_us";
    for (std::size_t i = 1; i < rows.front().size(); ++i) out << ",id" << (i - 1);
    out << '\n';
    char buf[64];
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            auto res = i == 0 ? std::to_chars(buf, buf + sizeof buf, r[i])
                              : std::to_chars(buf, buf + sizeof buf, r[i], std::chars_format::general, 17);
            out << (i ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

}  // namespace rydberg_id
