#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rydberg_id/basis.hpp"
#include "rydberg_id/dynamics.hpp"
#include "rydberg_id/geometry.hpp"
#include "rydberg_id/rng.hpp"

namespace rydberg_id {

enum class TaskKind { AtomCountLinear, AtomCountClosed, GraphsFour, Excitation, Combined };
enum class BasisSelection { Ground, Full };

inline std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::AtomCountLinear: return "atom-count-linear";
        case TaskKind::AtomCountClosed: return "atom-count-closed";
        case TaskKind::GraphsFour: return "graphs-four";
        case TaskKind::Excitation: return "excitation";
        case TaskKind::Combined: return "combined";
    }
    return "?";
}

inline TaskKind parse_task_kind(std::string_view s) {
    for (auto k : {TaskKind::AtomCountLinear, TaskKind::AtomCountClosed, TaskKind::GraphsFour, TaskKind::Excitation,
                   TaskKind::Combined}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown task kind: " + std::string(s));
}

inline std::string to_string(BasisSelection b) { return b == BasisSelection::Ground ? "ground" : "full"; }

inline BasisSelection parse_basis_selection(std::string_view s) {
    if (s == "ground") return BasisSelection::Ground;
    if (s == "full") return BasisSelection::Full;
    throw std::invalid_argument("unknown basis selection: " + std::string(s));
}

inline std::vector<std::string> default_configurations(TaskKind kind) {
    switch (kind) {
        case TaskKind::AtomCountLinear: return {"S1", "B2", "chain-3", "chain-4", "chain-5", "chain-6"};
        case TaskKind::AtomCountClosed: return {"S1", "B2", "T3", "C4", "P5", "H6"};
        case TaskKind::GraphsFour: return {"S4", "K4", "C4", "K4e"};
        default: return {};
    }
}

inline BasisSelection default_basis(TaskKind kind) {
    return kind == TaskKind::Excitation || kind == TaskKind::Combined ? BasisSelection::Full : BasisSelection::Ground;
}

struct TaskSpec {
    TaskKind kind = TaskKind::Excitation;
    std::vector<std::string> configurations;
    BasisSelection basis = BasisSelection::Full;
    HamiltonianParams hamiltonian;
    NoiseParams noise;
    int samples_per_class = 300;
    TimeGrid grid;
    std::uint64_t seed = 20210728;

    [[nodiscard]] int feature_count() const { return grid.observations(); }
};

inline TaskSpec make_task(TaskKind kind, std::vector<std::string> configurations = {}) {
    TaskSpec spec;
    spec.kind = kind;
    spec.configurations = configurations.empty() ? default_configurations(kind) : std::move(configurations);
    spec.basis = default_basis(kind);
    return spec;
}

/// One classification target: a configuration and one of its symmetrized states.
struct ClassInfo {
    std::string configuration;
    int basis_id = 0;
    std::string name;  // "chain-5:W2a"
};

inline std::vector<ClassInfo> task_classes(const TaskSpec& spec) {
    if (spec.configurations.empty()) throw std::invalid_argument("task has no configurations");
    std::vector<ClassInfo> classes;
    for (const auto& label : spec.configurations) {
        const auto config = configuration_by_name(label);
        if (spec.basis == BasisSelection::Ground) {
            classes.push_back({label, 0, label + ":W0"});
        } else {
            const auto catalog = build_basis_catalog(config, spec.hamiltonian.blockade_radius());
            for (const auto& w : catalog.states) classes.push_back({label, w.id, label + ":" + w.label});
        }
    }
    return classes;
}

inline nlohmann::json to_json(const TaskSpec& s) {
    return {
        {"kind", to_string(s.kind)},
        {"configurations", s.configurations},
        {"basis", to_string(s.basis)},
        {"mode", to_string(s.hamiltonian.mode)},
        {"rabi_mhz", s.hamiltonian.omega / kTwoPi},
        {"c6_ghz_um6", s.hamiltonian.c6 / kTwoPi / 1e3},
        {"dephasing_mhz", s.noise.base_dephasing / kTwoPi},
        {"decay_mhz", s.noise.base_decay / kTwoPi},
        {"noise_mean", s.noise.intensity_mean},
        {"noise_std", s.noise.intensity_std},
        {"samples_per_class", s.samples_per_class},
        {"total_time_us", s.grid.total},
        {"observe_every_us", s.grid.observe_every},
        {"step_us", s.grid.step},
        {"seed", s.seed},
    };
}

inline TaskSpec task_from_json(const nlohmann::json& j) {
    TaskSpec s;
    s.kind = parse_task_kind(j.at("kind").get<std::string>());
    s.configurations = j.at("configurations").get<std::vector<std::string>>();
    s.basis = parse_basis_selection(j.at("basis").get<std::string>());
    s.hamiltonian.mode = parse_interaction_mode(j.at("mode").get<std::string>());
    s.hamiltonian.omega = kTwoPi * j.at("rabi_mhz").get<double>();
    s.hamiltonian.c6 = kTwoPi * 1e3 * j.at("c6_ghz_um6").get<double>();
    s.noise.base_dephasing = kTwoPi * j.at("dephasing_mhz").get<double>();
    s.noise.base_decay = kTwoPi * j.at("decay_mhz").get<double>();
    s.noise.intensity_mean = j.at("noise_mean").get<double>();
    s.noise.intensity_std = j.at("noise_std").get<double>();
    s.samples_per_class = j.at("samples_per_class").get<int>();
    s.grid.total = j.at("total_time_us").get<double>();
    s.grid.observe_every = j.at("observe_every_us").get<double>();
    s.grid.step = j.value("step_us", 1e-3);
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

struct ProbabilitySample {
    int label = 0;
    std::vector<double> features;
};

struct Dataset {
    std::vector<ProbabilitySample> samples;
    std::vector<std::string> class_names;
    nlohmann::json provenance = nlohmann::json::object();

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] bool empty() const { return samples.empty(); }
    [[nodiscard]] int class_count() const { return static_cast<int>(class_names.size()); }
    [[nodiscard]] int feature_count() const {
        return samples.empty() ? 0 : static_cast<int>(samples.front().features.size());
    }
    [[nodiscard]] std::vector<int> class_counts() const {
        std::vector<int> counts(class_names.size(), 0);
        for (const auto& s : samples) counts.at(static_cast<std::size_t>(s.label))++;
        return counts;
    }
    /// Same class table and provenance, no samples.
    [[nodiscard]] Dataset empty_like() const { return {{}, class_names, provenance}; }
};

/// Memo of simulated class blocks, shared by experiments that reuse a class
/// under identical physics, grid and seed.
class ProfileCache {
public:
    using Block = std::vector<std::vector<double>>;

    std::shared_ptr<const Block> find(const std::string& key) const {
        std::lock_guard lock(mutex_);
        auto it = blocks_.find(key);
        return it == blocks_.end() ? nullptr : it->second;
    }
    void insert(const std::string& key, Block block) {
        std::lock_guard lock(mutex_);
        blocks_.emplace(key, std::make_shared<const Block>(std::move(block)));
    }
    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return blocks_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const Block>> blocks_;
};

struct GenerateOptions {
    int jobs = 1;
    ProfileCache* cache = nullptr;
};

namespace detail {

inline std::string class_key(const ClassInfo& c) { return c.configuration + "/" + std::to_string(c.basis_id); }

inline std::string block_key(const TaskSpec& s, const ClassInfo& c) {
    std::ostringstream k;
    k.precision(17);
    k << class_key(c) << '|' << to_string(s.hamiltonian.mode) << '|' << s.hamiltonian.omega << '|' << s.hamiltonian.c6
      << '|' << s.noise.intensity_mean << '|' << s.noise.intensity_std << '|' << s.noise.base_dephasing << '|'
      << s.noise.base_decay << '|' << s.grid.total << '|' << s.grid.observe_every << '|' << s.grid.step << '|'
      << s.seed << '|' << s.samples_per_class;
    return k.str();
}

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Seed of one shot. Keyed on the class's (configuration, basis ID) rather
/// than its position in the task, so a class keeps its samples when it
/// appears in several tasks.
inline std::uint64_t sample_seed(std::uint64_t master, const ClassInfo& c, int sample_index) {
    return derive_seed(master, hash_key(detail::class_key(c)), static_cast<std::uint64_t>(sample_index));
}

/// Noisy probability profiles of one class, [sample][time].
inline std::vector<std::vector<double>> simulate_class(const TaskSpec& spec, const ClassInfo& cls, int jobs = 1) {
    const auto config = configuration_by_name(cls.configuration);
    const auto catalog = build_basis_catalog(config, spec.hamiltonian.blockade_radius());
    const RydbergPropagator propagator(config, spec.hamiltonian);
    const std::vector<RydbergPropagator::Observable> observable{
        propagator.projector(catalog.states.at(static_cast<std::size_t>(cls.basis_id)))};

    std::vector<std::vector<double>> block(static_cast<std::size_t>(spec.samples_per_class));
    detail::parallel_for(block.size(), jobs, [&](std::size_t s) {
        auto rng = make_stream(sample_seed(spec.seed, cls, static_cast<int>(s)));
        const auto noise = sample_noise(spec.noise, rng);
        try {
            auto profile = propagator.observe(noise, spec.grid, observable).front();
            for (double& p : profile) p = std::clamp(p, 0.0, 1.0);
            block[s] = std::move(profile);
        } catch (const std::exception& e) {
            throw std::runtime_error("class " + cls.name + ", sample " + std::to_string(s) + ": " + e.what());
        }
    });
    return block;
}

inline Dataset generate_dataset(const TaskSpec& spec, const GenerateOptions& options = {}) {
    validate(spec.hamiltonian);
    validate(spec.noise);
    if (spec.samples_per_class < 1) throw std::invalid_argument("samples_per_class must be positive");
    spec.grid.check();
    const auto classes = task_classes(spec);

    Dataset ds;
    ds.provenance = {{"task", to_json(spec)}};
    for (const auto& c : classes) ds.class_names.push_back(c.name);
    ds.samples.reserve(classes.size() * static_cast<std::size_t>(spec.samples_per_class));

    for (std::size_t label = 0; label < classes.size(); ++label) {
        const auto& cls = classes[label];
        std::shared_ptr<const ProfileCache::Block> block;
        const std::string key = detail::block_key(spec, cls);
        if (options.cache) block = options.cache->find(key);
        if (!block) {
            auto fresh = simulate_class(spec, cls, options.jobs);
            if (options.cache) options.cache->insert(key, fresh);
            block = std::make_shared<const ProfileCache::Block>(std::move(fresh));
        }
        for (const auto& profile : *block) ds.samples.push_back({static_cast<int>(label), profile});
    }
    return ds;
}

/// Keeps the grid points of a coarser / shorter grid. Exact because the
/// integrator visits the same instants regardless of the requested horizon.
inline Dataset resample_grid(const Dataset& ds, const TimeGrid& from, const TimeGrid& to) {
    const double stride_f = to.observe_every / from.observe_every;
    const auto stride = static_cast<int>(std::llround(stride_f));
    if (stride < 1 || std::abs(stride_f - stride) > 1e-9) {
        throw std::invalid_argument("resample_grid: target spacing is not a multiple of the source spacing");
    }
    const int count = to.observations();
    if ((count - 1) * stride >= from.observations()) throw std::invalid_argument("resample_grid: target grid too long");
    Dataset out = ds.empty_like();
    for (const auto& s : ds.samples) {
        ProbabilitySample r{s.label, {}};
        for (int k = 0; k < count; ++k) r.features.push_back(s.features.at(static_cast<std::size_t>(k * stride)));
        out.samples.push_back(std::move(r));
    }
    if (out.provenance.contains("task")) {
        out.provenance["task"]["total_time_us"] = to.total;
        out.provenance["task"]["observe_every_us"] = to.observe_every;
    }
    return out;
}

/// Per-class shuffled split; each class contributes exactly count * test_fraction test rows.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0) throw std::invalid_argument("test_fraction must be in [0,1)");
    Dataset train = ds.empty_like(), test = ds.empty_like();
    std::vector<std::vector<std::size_t>> by_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class.at(static_cast<std::size_t>(ds.samples[i].label)).push_back(i);

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        if (test_fraction > 0.0 && rows.size() < 2) {
            throw std::invalid_argument("stratified_split: class '" + ds.class_names[c] + "' has fewer than 2 samples");
        }
        const double want = static_cast<double>(rows.size()) * test_fraction;
        const auto n_test = static_cast<std::size_t>(std::llround(want));
        if (std::abs(want - static_cast<double>(n_test)) > 1e-9) {
            throw std::invalid_argument("stratified_split: class size times test_fraction is not an integer");
        }
        auto rng = make_stream(derive_seed(seed, c, 0x5eed));
        std::shuffle(rows.begin(), rows.end(), rng);
        test_idx.insert(test_idx.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
        train_idx.insert(train_idx.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
    }
    auto rng = make_stream(derive_seed(seed, 0xabcdef));
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    std::shuffle(test_idx.begin(), test_idx.end(), rng);
    for (auto i : train_idx) train.samples.push_back(ds.samples[i]);
    for (auto i : test_idx) test.samples.push_back(ds.samples[i]);
    return {std::move(train), std::move(test)};
}

/// Standardisation with population statistics. Features whose spread is below
/// 1e-12 are only centred.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> scale;  // population std; 0 marks a constant feature

    [[nodiscard]] std::vector<double> transform(std::span<const double> x) const {
        if (x.size() != mean.size()) throw std::invalid_argument("FeatureScaler: feature count mismatch");
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double centred = x[i] - mean[i];
            out[i] = scale[i] < 1e-12 ? centred : centred / scale[i];
        }
        return out;
    }
};

inline FeatureScaler fit_scaler(const Dataset& train) {
    if (train.empty()) throw std::invalid_argument("fit_scaler: empty dataset");
    const auto f = static_cast<std::size_t>(train.feature_count());
    FeatureScaler sc{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
    const auto n = static_cast<double>(train.size());
    for (const auto& s : train.samples)
        for (std::size_t i = 0; i < f; ++i) sc.mean[i] += s.features[i];
    for (auto& m : sc.mean) m /= n;
    for (const auto& s : train.samples)
        for (std::size_t i = 0; i < f; ++i) sc.scale[i] += (s.features[i] - sc.mean[i]) * (s.features[i] - sc.mean[i]);
    for (auto& v : sc.scale) v = std::sqrt(v / n);
    return sc;
}

inline std::vector<double> transform(const FeatureScaler& sc, std::span<const double> x) { return sc.transform(x); }

// ---- CSV persistence -------------------------------------------------------

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    const int f = ds.feature_count();
    out << "label";
    for (int i = 0; i < f; ++i) out << ",x" << i;
    out << '\n';
    char buf[64];
    for (const auto& s : ds.samples) {
        out << s.label;
        for (double v : s.features) {
            auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
    nlohmann::json meta = ds.provenance;
    meta["class_names"] = ds.class_names;
    meta["feature_count"] = f;
    std::ofstream side(sidecar_path(path));
    side << meta.dump(2) << '\n';
}

/// Loads a dataset CSV (and its JSON sidecar when present). When
/// `expected_features` is non-negative the column count must match it.
inline Dataset load_dataset(const std::string& path, int expected_features = -1) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw std::runtime_error("dataset is empty: " + path);

    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 2 || header[0] != "label") throw std::runtime_error("dataset header must start with 'label'");
    const int f = static_cast<int>(header.size()) - 1;
    for (int i = 0; i < f; ++i) {
        if (header[static_cast<std::size_t>(i) + 1] != "x" + std::to_string(i)) throw std::runtime_error("malformed dataset header");
    }
    if (expected_features >= 0 && f != expected_features) {
        throw std::runtime_error("dataset has " + std::to_string(f) + " features, expected " +
                                 std::to_string(expected_features));
    }

    Dataset ds;
    int max_label = -1;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        ProbabilitySample s;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        auto r = std::from_chars(p, end, s.label);
        if (r.ec != std::errc{} || s.label < 0) throw std::runtime_error("row " + std::to_string(row) + ": bad label");
        p = r.ptr;
        for (int i = 0; i < f; ++i) {
            if (p == end || *p != ',') throw std::runtime_error("row " + std::to_string(row) + ": too few columns");
            ++p;
            double v = 0.0;
            auto rv = std::from_chars(p, end, v);
            if (rv.ec != std::errc{}) throw std::runtime_error("row " + std::to_string(row) + ": bad number");
            s.features.push_back(v);
            p = rv.ptr;
        }
        if (p != end) throw std::runtime_error("row " + std::to_string(row) + ": too many columns");
        max_label = std::max(max_label, s.label);
        ds.samples.push_back(std::move(s));
    }

    std::ifstream side(sidecar_path(path));
    if (side) {
        nlohmann::json meta = nlohmann::json::parse(side);
        ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
        meta.erase("class_names");
        meta.erase("feature_count");
        ds.provenance = std::move(meta);
        if (max_label >= ds.class_count()) throw std::runtime_error("dataset label exceeds class table");
    } else {
        for (int c = 0; c <= max_label; ++c) ds.class_names.push_back("class-" + std::to_string(c));
    }
    return ds;
}

}  // namespace rydberg_id
