#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "rydberg_id/datagen.hpp"
#include "rydberg_id/rng.hpp"

namespace rydberg_id {

struct SvmHyperparameters {
    double alpha = 1e-4;      // L2 regularisation strength
    int max_epochs = 1000;
    double tol = 1e-3;        // per-sample loss improvement required to reset patience
    int n_iter_no_change = 5;
    std::uint64_t seed = 0;
};

/// One-vs-all linear SVM on standardised features.
struct SvmModel {
    FeatureScaler scaler;
    std::vector<std::vector<double>> weights;  // [class][feature]
    std::vector<double> bias;
    SvmHyperparameters hyper;

    [[nodiscard]] int class_count() const { return static_cast<int>(weights.size()); }
    [[nodiscard]] int feature_count() const { return static_cast<int>(scaler.mean.size()); }

    [[nodiscard]] std::vector<double> decision_function(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != feature_count()) throw std::invalid_argument("SvmModel: feature count mismatch");
        const auto z = scaler.transform(x);
        std::vector<double> scores(weights.size());
        for (std::size_t c = 0; c < weights.size(); ++c) {
            scores[c] = std::inner_product(z.begin(), z.end(), weights[c].begin(), bias[c]);
        }
        return scores;
    }

    /// argmax of the class scores; the lowest ID wins ties.
    [[nodiscard]] int predict(std::span<const double> x) const {
        const auto s = decision_function(x);
        return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
    }
};

namespace detail {

struct BinarySgdResult {
    std::vector<double> w;
    double b = 0.0;
    int epochs = 0;
};

// Hinge-loss SGD with the "optimal" inverse-scaling schedule eta_t = 1 / (alpha (t0 + t)),
// t0 from the typical-weight heuristic. The weight vector is kept as scale * w so the
// L2 shrink step is O(1).
inline BinarySgdResult sgd_hinge(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                 const SvmHyperparameters& hp, std::uint64_t seed) {
    const std::size_t n = x.size();
    const std::size_t f = n ? x.front().size() : 0;
    std::vector<double> w(f, 0.0);
    double scale = 1.0;
    double b = 0.0;

    const double typw = std::sqrt(1.0 / std::sqrt(hp.alpha));
    const double eta0 = typw;  // hinge: |dloss(-typw, 1)| = 1
    const double t0 = 1.0 / (eta0 * hp.alpha);
    double t = 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_stream(seed);

    double best_loss = std::numeric_limits<double>::infinity();
    int no_improvement = 0;
    int epoch = 0;
    for (epoch = 1; epoch <= hp.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum_loss = 0.0;
        for (std::size_t i : order) {
            const auto& xi = x[i];
            const double p = scale * std::inner_product(xi.begin(), xi.end(), w.begin(), 0.0) + b;
            const double margin = p * y[i];
            sum_loss += std::max(0.0, 1.0 - margin);
            const double eta = 1.0 / (hp.alpha * (t0 + t - 1.0));
            const double update = margin <= 1.0 ? eta * y[i] : 0.0;
            scale *= std::max(0.0, 1.0 - eta * hp.alpha);
            if (scale < 1e-9) {
                for (double& v : w) v *= scale;
                scale = 1.0;
            }
            if (update != 0.0) {
                const double step = update / scale;
                for (std::size_t k = 0; k < f; ++k) w[k] += step * xi[k];
                b += update;
            }
            t += 1.0;
        }
        if (sum_loss > best_loss - hp.tol * static_cast<double>(n)) {
            ++no_improvement;
        } else {
            no_improvement = 0;
        }
        best_loss = std::min(best_loss, sum_loss);
        if (no_improvement >= hp.n_iter_no_change) break;
    }
    for (double& v : w) v *= scale;
    return {std::move(w), b, std::min(epoch, hp.max_epochs)};
}

}  // namespace detail

inline SvmModel train_svm(const Dataset& train, const SvmHyperparameters& hp = {}) {
    if (train.empty()) throw std::invalid_argument("train_svm: empty dataset");
    const auto counts = train.class_counts();
    if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2) {
        throw std::invalid_argument("train_svm: need at least two classes");
    }
    if (!(hp.alpha > 0.0) || hp.max_epochs < 1) throw std::invalid_argument("train_svm: bad hyperparameters");

    SvmModel model;
    model.hyper = hp;
    model.scaler = fit_scaler(train);
    std::vector<std::vector<double>> x;
    x.reserve(train.size());
    for (const auto& s : train.samples) x.push_back(model.scaler.transform(s.features));

    const int classes = train.class_count();
    for (int c = 0; c < classes; ++c) {
        std::vector<double> y(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) y[i] = train.samples[i].label == c ? 1.0 : -1.0;
        auto r = detail::sgd_hinge(x, y, hp, derive_seed(hp.seed, static_cast<std::uint64_t>(c), 0x5a1));
        model.weights.push_back(std::move(r.w));
        model.bias.push_back(r.b);
    }
    return model;
}

}  // namespace rydberg_id
