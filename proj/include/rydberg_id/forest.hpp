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

struct ForestHyperparameters {
    int n_trees = 100;
    bool bootstrap = true;
    int max_features = 0;  // 0: ceil(sqrt(features)); negative: all features
    int min_samples_split = 2;
    std::uint64_t seed = 0;

    [[nodiscard]] int features_per_split(int features) const {
        if (max_features < 0) return features;
        if (max_features == 0) return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(features)))));
        return std::min(max_features, features);
    }
};

/// Column-major copy of a dataset's features, the layout split search wants.
struct FeatureTable {
    int rows = 0;
    int features = 0;
    int classes = 0;
    std::vector<double> values;  // [feature * rows + row]
    std::vector<int> labels;

    explicit FeatureTable(const Dataset& ds)
        : rows(static_cast<int>(ds.size())), features(ds.feature_count()), classes(ds.class_count()) {
        values.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(features));
        for (int r = 0; r < rows; ++r) {
            const auto& s = ds.samples[static_cast<std::size_t>(r)];
            labels.push_back(s.label);
            for (int f = 0; f < features; ++f) at(f, r) = s.features[static_cast<std::size_t>(f)];
        }
    }

    double& at(int feature, int row) { return values[static_cast<std::size_t>(feature) * rows + row]; }
    [[nodiscard]] double at(int feature, int row) const { return values[static_cast<std::size_t>(feature) * rows + row]; }
};

struct SplitChoice {
    bool valid = false;
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();  // weighted Gini of the children
};

inline double gini(std::span<const double> counts, double total) {
    if (total <= 0.0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += (c / total) * (c / total);
    return 1.0 - s;
}

/// Best threshold split of `rows` over `candidates` by weighted Gini impurity.
/// Thresholds sit midway between consecutive distinct values; ties go to the
/// lower feature index, then the lower threshold.
inline SplitChoice best_split(const FeatureTable& table, std::span<const int> rows, std::span<const int> candidates) {
    SplitChoice best;
    const auto n = static_cast<double>(rows.size());
    const auto k = static_cast<std::size_t>(table.classes);
    std::vector<std::pair<double, int>> column(rows.size());
    std::vector<double> total(k, 0.0), left(k), right(k);
    for (int r : rows) total[static_cast<std::size_t>(table.labels[static_cast<std::size_t>(r)])] += 1.0;

    constexpr double tie_eps = 1e-12;
    for (int f : candidates) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            column[i] = {table.at(f, rows[i]), table.labels[static_cast<std::size_t>(rows[i])]};
        }
        std::sort(column.begin(), column.end());
        if (column.front().first == column.back().first) continue;
        std::fill(left.begin(), left.end(), 0.0);
        right = total;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
            const auto lbl = static_cast<std::size_t>(column[i].second);
            left[lbl] += 1.0;
            right[lbl] -= 1.0;
            if (column[i].first == column[i + 1].first) continue;
            const double nl = static_cast<double>(i + 1);
            const double nr = n - nl;
            const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
            double threshold = 0.5 * (column[i].first + column[i + 1].first);
            if (threshold >= column[i + 1].first) threshold = column[i].first;
            const bool better = imp < best.impurity - tie_eps;
            const bool tie = std::abs(imp - best.impurity) <= tie_eps &&
                             (f < best.feature || (f == best.feature && threshold < best.threshold));
            if (!best.valid || better || tie) best = {true, f, threshold, imp};
        }
    }
    return best;
}

/// CART tree. Rows with `x[feature] <= threshold` go left. Leaves hold class
/// proportions of the training rows that reached them.
struct CartTree {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::vector<double> value;
    };
    std::vector<Node> nodes;
    int classes = 0;
    int features = 0;

    [[nodiscard]] const std::vector<double>& leaf_distribution(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != features) throw std::invalid_argument("CartTree: feature count mismatch");
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    [[nodiscard]] int predict(std::span<const double> x) const {
        const auto& v = leaf_distribution(x);
        return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
    }

    [[nodiscard]] int depth() const {
        std::vector<int> d(nodes.size(), 0);
        int best = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].feature < 0) continue;
            d[static_cast<std::size_t>(nodes[i].left)] = d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
            best = std::max(best, d[i] + 1);
        }
        return best;
    }
};

/// Grows a tree on `rows` (duplicates allowed, as produced by bootstrap).
/// At each node, features are visited in random order until `max_features`
/// non-constant ones have been scanned; growth stops at purity or when fewer
/// than `min_samples_split` rows remain.
inline CartTree grow_tree(const FeatureTable& table, std::vector<int> rows, int max_features, int min_samples_split,
                          RngStream& rng) {
    CartTree tree;
    tree.classes = table.classes;
    tree.features = table.features;
    std::vector<int> feature_order(static_cast<std::size_t>(table.features));
    std::iota(feature_order.begin(), feature_order.end(), 0);

    struct Pending {
        int node;
        std::vector<int> rows;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(rows)});
    while (!stack.empty()) {
        Pending job = std::move(stack.back());
        stack.pop_back();
        std::vector<double> counts(static_cast<std::size_t>(table.classes), 0.0);
        for (int r : job.rows) counts[static_cast<std::size_t>(table.labels[static_cast<std::size_t>(r)])] += 1.0;
        const auto n = static_cast<double>(job.rows.size());
        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;

        SplitChoice split;
        if (!pure && static_cast<int>(job.rows.size()) >= min_samples_split) {
            std::shuffle(feature_order.begin(), feature_order.end(), rng);
            std::vector<int> candidates;
            for (int f : feature_order) {
                if (static_cast<int>(candidates.size()) >= max_features) break;
                const double first = table.at(f, job.rows.front());
                const bool constant = std::all_of(job.rows.begin(), job.rows.end(),
                                                  [&](int r) { return table.at(f, r) == first; });
                if (!constant) candidates.push_back(f);
            }
            if (!candidates.empty()) split = best_split(table, job.rows, candidates);
        }

        if (!split.valid) {
            for (double& c : counts) c /= n;
            tree.nodes[static_cast<std::size_t>(job.node)].value = std::move(counts);
            continue;
        }
        std::vector<int> left_rows, right_rows;
        for (int r : job.rows) (table.at(split.feature, r) <= split.threshold ? left_rows : right_rows).push_back(r);
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[static_cast<std::size_t>(job.node)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left;
        node.right = left + 1;
        for (double& c : counts) c /= n;
        node.value = std::move(counts);
        stack.push_back({left + 1, std::move(right_rows)});
        stack.push_back({left, std::move(left_rows)});
    }
    return tree;
}

/// Soft-voting ensemble of CART trees.
struct ForestModel {
    std::vector<CartTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    ForestHyperparameters hyper;
    int classes = 0;
    int features = 0;

    [[nodiscard]] std::vector<double> predict_proba(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != features) throw std::invalid_argument("ForestModel: feature count mismatch");
        std::vector<double> p(static_cast<std::size_t>(classes), 0.0);
        for (const auto& t : trees) {
            const auto& v = t.leaf_distribution(x);
            for (std::size_t c = 0; c < p.size(); ++c) p[c] += v[c];
        }
        for (double& v : p) v /= static_cast<double>(trees.size());
        return p;
    }

    [[nodiscard]] int predict(std::span<const double> x) const {
        const auto p = predict_proba(x);
        return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }
};

inline ForestModel train_forest(const Dataset& train, const ForestHyperparameters& hp = {}, int jobs = 1) {
    if (train.empty()) throw std::invalid_argument("train_forest: empty dataset");
    const auto counts = train.class_counts();
    if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2) {
        throw std::invalid_argument("train_forest: need at least two classes");
    }
    if (hp.n_trees < 1) throw std::invalid_argument("train_forest: n_trees must be positive");

    const FeatureTable table(train);
    ForestModel model;
    model.hyper = hp;
    model.classes = table.classes;
    model.features = table.features;
    model.trees.resize(static_cast<std::size_t>(hp.n_trees));
    for (int t = 0; t < hp.n_trees; ++t) model.tree_seeds.push_back(derive_seed(hp.seed, static_cast<std::uint64_t>(t), 0x7ee));
    const int per_split = hp.features_per_split(table.features);

    detail::parallel_for(model.trees.size(), jobs, [&](std::size_t t) {
        auto rng = make_stream(model.tree_seeds[t]);
        std::vector<int> rows(static_cast<std::size_t>(table.rows));
        if (hp.bootstrap) {
            std::uniform_int_distribution<int> pick(0, table.rows - 1);
            for (int& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        model.trees[t] = grow_tree(table, std::move(rows), per_split, hp.min_samples_split, rng);
    });
    return model;
}

}  // namespace rydberg_id
