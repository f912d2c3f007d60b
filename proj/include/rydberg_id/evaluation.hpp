#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rydberg_id/datagen.hpp"
#include "rydberg_id/forest.hpp"
#include "rydberg_id/svm.hpp"

namespace rydberg_id {

enum class ModelKind { Svm, Forest };

inline std::string to_string(ModelKind k) { return k == ModelKind::Svm ? "svm" : "rfc"; }

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "svm") return ModelKind::Svm;
    if (s == "rfc" || s == "forest") return ModelKind::Forest;
    throw std::invalid_argument("unknown model kind: " + std::string(s));
}

struct ModelHyperparameters {
    SvmHyperparameters svm;
    ForestHyperparameters forest;
    int jobs = 1;
};

using TrainedModel = std::variant<SvmModel, ForestModel>;

inline TrainedModel train_model(ModelKind kind, const Dataset& train, const ModelHyperparameters& hp = {}) {
    if (kind == ModelKind::Svm) return train_svm(train, hp.svm);
    return train_forest(train, hp.forest, hp.jobs);
}

inline int predict(const TrainedModel& m, std::span<const double> x) {
    return std::visit([&](const auto& model) { return model.predict(x); }, m);
}

inline ModelKind kind_of(const TrainedModel& m) {
    return std::holds_alternative<SvmModel>(m) ? ModelKind::Svm : ModelKind::Forest;
}

inline int class_count(const TrainedModel& m) {
    if (const auto* s = std::get_if<SvmModel>(&m)) return s->class_count();
    return std::get<ForestModel>(m).classes;
}

// ---- statistics ------------------------------------------------------------

/// Rows are true IDs, columns predicted IDs.
struct ConfusionMatrix {
    std::vector<std::vector<long>> counts;

    explicit ConfusionMatrix(int classes = 0)
        : counts(static_cast<std::size_t>(classes), std::vector<long>(static_cast<std::size_t>(classes), 0)) {}

    [[nodiscard]] int classes() const { return static_cast<int>(counts.size()); }
    [[nodiscard]] long total() const {
        long t = 0;
        for (const auto& r : counts) t = std::accumulate(r.begin(), r.end(), t);
        return t;
    }
    [[nodiscard]] long correct() const {
        long t = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
        return t;
    }
    [[nodiscard]] double accuracy() const {
        const long n = total();
        return n ? static_cast<double>(correct()) / static_cast<double>(n) : 0.0;
    }
    [[nodiscard]] std::vector<long> row_sums() const {
        std::vector<long> s;
        for (const auto& r : counts) s.push_back(std::accumulate(r.begin(), r.end(), 0L));
        return s;
    }
};

template <class Predictor>
ConfusionMatrix confusion_matrix(const Predictor& predictor, const Dataset& test, int classes) {
    if (test.empty()) throw std::invalid_argument("confusion_matrix: empty test set");
    ConfusionMatrix cm(classes);
    for (const auto& s : test.samples) {
        const int p = predictor(s.features);
        cm.counts.at(static_cast<std::size_t>(s.label)).at(static_cast<std::size_t>(p))++;
    }
    return cm;
}

inline ConfusionMatrix confusion_matrix(const TrainedModel& model, const Dataset& test) {
    return confusion_matrix([&](std::span<const double> x) { return predict(model, x); }, test,
                            std::max(class_count(model), test.class_count()));
}

struct ConfidenceInterval {
    double estimate = 0.0;  // adjusted proportion
    double lower = 0.0;
    double upper = 0.0;
    double z = 1.96;
};

/// Agresti-Coull binomial interval: add z^2/2 successes and z^2/2 failures, then Wald.
inline ConfidenceInterval agresti_coull(long successes, long n, double z = 1.96) {
    if (n <= 0) throw std::invalid_argument("agresti_coull: n must be positive");
    if (successes < 0 || successes > n) throw std::invalid_argument("agresti_coull: successes out of range");
    const double z2 = z * z;
    const double n_adj = static_cast<double>(n) + z2;
    const double p = (static_cast<double>(successes) + z2 / 2.0) / n_adj;
    const double half = z * std::sqrt(p * (1.0 - p) / n_adj);
    return {p, std::max(0.0, p - half), std::min(1.0, p + half), z};
}

// ---- cross-validation ------------------------------------------------------

/// Proportional per-class subsample of `size` rows (largest-remainder rounding).
inline Dataset stratified_subsample(const Dataset& ds, std::size_t size, std::uint64_t seed) {
    if (size > ds.size()) throw std::invalid_argument("stratified_subsample: size exceeds dataset");
    const auto counts = ds.class_counts();
    std::vector<std::size_t> quota(counts.size());
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const double exact = static_cast<double>(size) * counts[c] / static_cast<double>(ds.size());
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[c];
        remainder.push_back({-(exact - std::floor(exact)), c});
    }
    std::sort(remainder.begin(), remainder.end());
    for (std::size_t i = 0; assigned < size; ++i, ++assigned) quota[remainder[i].second]++;

    std::vector<std::vector<std::size_t>> by_class(counts.size());
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
    Dataset out = ds.empty_like();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rng = make_stream(derive_seed(seed, c, 0x5ab));
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        for (std::size_t i = 0; i < quota[c]; ++i) out.samples.push_back(ds.samples[by_class[c][i]]);
    }
    return out;
}

/// Fold index of every row: classes are dealt round-robin so each fold gets
/// a near-equal share of every class.
inline std::vector<int> stratified_folds(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_folds: k must be at least 2");
    if (static_cast<int>(ds.size()) < k) throw std::invalid_argument("stratified_folds: fewer rows than folds");
    std::vector<std::vector<std::size_t>> by_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
    std::vector<int> fold(ds.size(), 0);
    int next = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rng = make_stream(derive_seed(seed, c, 0xf01d));
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        for (std::size_t i : by_class[c]) {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    return fold;
}

struct CrossValidationResult {
    std::vector<double> fold_accuracy;
    double mean = 0.0;
    double std = 0.0;
};

inline CrossValidationResult k_fold(const Dataset& data, ModelKind kind, int k, const ModelHyperparameters& hp,
                                    std::uint64_t seed) {
    const auto fold = stratified_folds(data, k, seed);
    CrossValidationResult r;
    for (int f = 0; f < k; ++f) {
        Dataset train = data.empty_like(), valid = data.empty_like();
        for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? valid : train).samples.push_back(data.samples[i]);
        const auto model = train_model(kind, train, hp);
        r.fold_accuracy.push_back(confusion_matrix(model, valid).accuracy());
    }
    r.mean = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) / k;
    double var = 0.0;
    for (double a : r.fold_accuracy) var += (a - r.mean) * (a - r.mean);
    r.std = std::sqrt(var / k);
    return r;
}

struct LearningCurvePoint {
    long total_samples = 0;     // N: generated samples the point stands for
    long training_samples = 0;  // rows actually cross-validated
    double mean = 0.0;
    double std = 0.0;
};

/// Cross-validated accuracy against sample count. Each N is read as a total
/// generated-sample count; its training share (train_fraction * N) is drawn
/// from `train` by stratified subsampling and k-fold cross-validated.
inline std::vector<LearningCurvePoint> cross_validate(const Dataset& train, ModelKind kind, int k,
                                                      const std::vector<long>& sizes, const ModelHyperparameters& hp,
                                                      std::uint64_t seed, double train_fraction = 0.8) {
    std::vector<LearningCurvePoint> curve;
    const int classes = train.class_count();
    for (long size : sizes) {
        const auto rows = static_cast<long>(std::llround(static_cast<double>(size) * train_fraction));
        if (rows < k || rows < classes) {
            throw std::invalid_argument("cross_validate: size " + std::to_string(size) + " too small for " +
                                        std::to_string(k) + "-fold stratified validation");
        }
        if (rows > static_cast<long>(train.size())) {
            throw std::invalid_argument("cross_validate: size " + std::to_string(size) + " exceeds available data");
        }
        const auto subset = stratified_subsample(train, static_cast<std::size_t>(rows),
                                                 derive_seed(seed, static_cast<std::uint64_t>(size)));
        const auto cv = k_fold(subset, kind, k, hp, derive_seed(seed, static_cast<std::uint64_t>(size), 1));
        curve.push_back({size, rows, cv.mean, cv.std});
    }
    return curve;
}

/// `points` evenly spaced sizes up to `max_size`.
inline std::vector<long> default_size_grid(long max_size, int points = 10) {
    std::vector<long> sizes;
    for (int i = 1; i <= points; ++i) sizes.push_back(max_size * i / points);
    return sizes;
}

// ---- model documents -------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const FeatureScaler& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

inline nlohmann::json to_json(const TrainedModel& model) {
    nlohmann::json j{{"format", "rydberg-id-model"}, {"version", kModelFormatVersion}};
    if (const auto* svm = std::get_if<SvmModel>(&model)) {
        j["kind"] = "svm";
        j["scaler"] = to_json(svm->scaler);
        j["weights"] = svm->weights;
        j["bias"] = svm->bias;
        j["hyperparameters"] = {{"alpha", svm->hyper.alpha},
                                {"max_epochs", svm->hyper.max_epochs},
                                {"tol", svm->hyper.tol},
                                {"n_iter_no_change", svm->hyper.n_iter_no_change},
                                {"seed", svm->hyper.seed}};
        return j;
    }
    const auto& forest = std::get<ForestModel>(model);
    j["kind"] = "rfc";
    j["classes"] = forest.classes;
    j["features"] = forest.features;
    j["tree_seeds"] = forest.tree_seeds;
    j["hyperparameters"] = {{"n_trees", forest.hyper.n_trees},
                            {"bootstrap", forest.hyper.bootstrap},
                            {"max_features", forest.hyper.max_features},
                            {"min_samples_split", forest.hyper.min_samples_split},
                            {"seed", forest.hyper.seed}};
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& t : forest.trees) {
        nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                       left = nlohmann::json::array(), right = nlohmann::json::array(),
                       value = nlohmann::json::array();
        for (const auto& nd : t.nodes) {
            feature.push_back(nd.feature);
            threshold.push_back(nd.threshold);
            left.push_back(nd.left);
            right.push_back(nd.right);
            value.push_back(nd.value);
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}});
    }
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "rydberg-id-model") throw std::runtime_error("not a rydberg-id model document");
    if (j.at("version").get<int>() != kModelFormatVersion) throw std::runtime_error("unsupported model version");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "svm") {
        SvmModel m;
        m.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
        m.scaler.scale = j.at("scaler").at("scale").get<std::vector<double>>();
        m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        m.bias = j.at("bias").get<std::vector<double>>();
        const auto& h = j.at("hyperparameters");
        m.hyper = {h.at("alpha"), h.at("max_epochs"), h.at("tol"), h.at("n_iter_no_change"), h.at("seed")};
        if (m.weights.size() != m.bias.size()) throw std::runtime_error("svm model: weights/bias size mismatch");
        for (const auto& w : m.weights) {
            if (w.size() != m.scaler.mean.size()) throw std::runtime_error("svm model: weight length mismatch");
        }
        return m;
    }
    if (kind == "rfc") {
        ForestModel m;
        m.classes = j.at("classes");
        m.features = j.at("features");
        m.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
        const auto& h = j.at("hyperparameters");
        m.hyper.n_trees = h.at("n_trees");
        m.hyper.bootstrap = h.at("bootstrap");
        m.hyper.max_features = h.at("max_features");
        m.hyper.min_samples_split = h.at("min_samples_split");
        m.hyper.seed = h.at("seed");
        for (const auto& jt : j.at("trees")) {
            CartTree t;
            t.classes = m.classes;
            t.features = m.features;
            const auto feature = jt.at("feature").get<std::vector<int>>();
            const auto threshold = jt.at("threshold").get<std::vector<double>>();
            const auto left = jt.at("left").get<std::vector<int>>();
            const auto right = jt.at("right").get<std::vector<int>>();
            const auto value = jt.at("value").get<std::vector<std::vector<double>>>();
            for (std::size_t i = 0; i < feature.size(); ++i) t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
            m.trees.push_back(std::move(t));
        }
        return m;
    }
    throw std::runtime_error("unknown model kind: " + kind);
}

inline void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model: " + path);
    out << to_json(model).dump() << '\n';
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model: " + path);
    return model_from_json(nlohmann::json::parse(in));
}

}  // namespace rydberg_id
