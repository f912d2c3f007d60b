#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "rydberg_id/evaluation.hpp"
#include "oracles.hpp"

using namespace rydberg_id;

namespace {

Dataset blobs(std::uint64_t seed, int classes, int per_class, double spread, int features = 4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, spread);
    Dataset ds;
    for (int c = 0; c < classes; ++c) ds.class_names.push_back("k" + std::to_string(c));
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            ProbabilitySample s{c, {}};
            for (int f = 0; f < features; ++f) s.features.push_back((f == c % features ? 3.0 : 0.0) + g(rng));
            ds.samples.push_back(s);
        }
    return ds;
}

}  // namespace

TEST(AgrestiCoull, MatchesOracleOnGrid) {
    int cases = 0;
    for (long n : {1L, 2L, 5L, 10L, 37L, 60L, 100L, 360L, 1000L, 12345L}) {
        for (int step = 0; step <= 19; ++step) {
            const long x = n * step / 19;
            const auto ci = agresti_coull(x, n);
            const auto [lo, hi] = oracle::agresti_coull(x, n);
            EXPECT_NEAR(ci.lower, static_cast<double>(lo), 1e-12) << x << "/" << n;
            EXPECT_NEAR(ci.upper, static_cast<double>(hi), 1e-12) << x << "/" << n;
            EXPECT_LE(ci.lower, ci.estimate);
            EXPECT_GE(ci.upper, ci.estimate);
            ++cases;
        }
    }
    EXPECT_EQ(cases, 200);
}

TEST(AgrestiCoull, WorkedExample) {
    const auto ci = agresti_coull(95, 100);
    EXPECT_NEAR(ci.lower, 0.8854, 5e-5);
    EXPECT_NEAR(ci.upper, 0.9813, 5e-5);
    EXPECT_NEAR(ci.estimate, (95 + 1.9208) / 103.8416, 1e-12);
}

TEST(AgrestiCoull, PerfectScoreShrinksTowardHalf) {
    for (long n : {10L, 60L, 100L, 360L}) {
        const auto ci = agresti_coull(n, n);
        EXPECT_LT(ci.estimate, 1.0);
        EXPECT_EQ(ci.upper, 1.0);
        EXPECT_LT(ci.lower, 1.0);
        const auto zero = agresti_coull(0, n);
        EXPECT_GT(zero.estimate, 0.0);
        EXPECT_EQ(zero.lower, 0.0);
        EXPECT_NEAR(zero.estimate, 1.0 - ci.estimate, 1e-15);
    }
}

TEST(AgrestiCoull, Errors) {
    EXPECT_THROW(agresti_coull(0, 0), std::invalid_argument);
    EXPECT_THROW(agresti_coull(5, 4), std::invalid_argument);
    EXPECT_THROW(agresti_coull(-1, 4), std::invalid_argument);
}

TEST(AgrestiCoull, WidthShrinksWithN) {
    double previous = 1.0;
    for (long n : {10L, 40L, 160L, 640L}) {
        const auto ci = agresti_coull(n * 9 / 10, n);
        EXPECT_LT(ci.upper - ci.lower, previous);
        previous = ci.upper - ci.lower;
    }
}

TEST(Confusion, Identities) {
    const auto ds = blobs(1, 4, 30, 1.2);
    const auto [train, test] = stratified_split(ds, 0.2, 3);
    for (auto kind : {ModelKind::Svm, ModelKind::Forest}) {
        ModelHyperparameters hp;
        hp.forest.n_trees = 20;
        const auto model = train_model(kind, train, hp);
        const auto cm = confusion_matrix(model, test);
        EXPECT_EQ(cm.total(), static_cast<long>(test.size()));
        const auto rows = cm.row_sums();
        const auto counts = test.class_counts();
        for (int c = 0; c < 4; ++c) EXPECT_EQ(rows[c], counts[c]);
        long hits = 0;
        for (const auto& s : test.samples) hits += predict(model, s.features) == s.label;
        EXPECT_EQ(cm.correct(), hits);
        EXPECT_DOUBLE_EQ(cm.accuracy(), static_cast<double>(hits) / test.size());
        EXPECT_EQ(kind_of(model), kind);
        EXPECT_EQ(class_count(model), 4);
    }
    EXPECT_THROW(confusion_matrix(train_model(ModelKind::Svm, train), test.empty_like()), std::invalid_argument);
}

TEST(ModelKinds, Names) {
    EXPECT_EQ(to_string(ModelKind::Svm), "svm");
    EXPECT_EQ(to_string(ModelKind::Forest), "rfc");
    EXPECT_EQ(parse_model_kind("forest"), ModelKind::Forest);
    EXPECT_THROW(parse_model_kind("knn"), std::invalid_argument);
}

TEST(Folds, BalancedAndComplete) {
    Dataset ds = blobs(2, 3, 0, 1.0);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 10 + 7 * c; ++i) ds.samples.push_back({c, {double(i)}});
    const int k = 5;
    const auto fold = stratified_folds(ds, k, 9);
    std::vector<std::vector<int>> per(static_cast<std::size_t>(k), std::vector<int>(3, 0));
    for (std::size_t i = 0; i < ds.size(); ++i) per[fold[i]][ds.samples[i].label]++;
    for (int c = 0; c < 3; ++c) {
        int lo = 1 << 30, hi = 0, sum = 0;
        for (int f = 0; f < k; ++f) {
            lo = std::min(lo, per[f][c]);
            hi = std::max(hi, per[f][c]);
            sum += per[f][c];
        }
        EXPECT_LE(hi - lo, 1) << "class " << c;
        EXPECT_EQ(sum, 10 + 7 * c);
    }
    std::vector<int> sizes(k, 0);
    for (int f : fold) sizes[f]++;
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
    EXPECT_THROW(stratified_folds(ds, 1, 0), std::invalid_argument);
    EXPECT_THROW(stratified_folds(blobs(1, 2, 2, 1.0), 5, 0), std::invalid_argument);
}

TEST(Subsample, ProportionalQuotas) {
    Dataset ds = blobs(3, 3, 0, 1.0);
    const int sizes[3] = {50, 30, 20};
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < sizes[c]; ++i) ds.samples.push_back({c, {double(c * 100 + i)}});
    const auto sub = stratified_subsample(ds, 33, 1);
    EXPECT_EQ(sub.size(), 33u);
    // exact quotas 16.5, 9.9, 6.6 -> 16/17, 10, 7 with largest remainders
    const auto counts = sub.class_counts();
    EXPECT_EQ(counts[0] + counts[1] + counts[2], 33);
    EXPECT_EQ(counts[1], 10);
    EXPECT_EQ(counts[2], 7);
    std::set<double> seen;
    for (const auto& s : sub.samples) EXPECT_TRUE(seen.insert(s.features[0]).second);
    EXPECT_THROW(stratified_subsample(ds, 101, 1), std::invalid_argument);
}

TEST(CrossValidation, CurveShapeAndErrors) {
    const auto ds = blobs(4, 3, 40, 0.8);
    ModelHyperparameters hp;
    hp.forest.n_trees = 10;
    const auto curve = cross_validate(ds, ModelKind::Forest, 5, {50, 100, 150}, hp, 2);
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_EQ(curve[0].training_samples, 40);
    EXPECT_EQ(curve[2].training_samples, 120);
    for (const auto& p : curve) {
        EXPECT_GE(p.mean, 0.0);
        EXPECT_LE(p.mean, 1.0);
        EXPECT_GE(p.std, 0.0);
    }
    EXPECT_GT(curve.back().mean, 0.9);
    EXPECT_THROW(cross_validate(ds, ModelKind::Svm, 10, {10}, hp, 2), std::invalid_argument);
    EXPECT_THROW(cross_validate(ds, ModelKind::Svm, 5, {200}, hp, 2), std::invalid_argument);
    const auto again = cross_validate(ds, ModelKind::Forest, 5, {50, 100, 150}, hp, 2);
    for (std::size_t i = 0; i < curve.size(); ++i) EXPECT_EQ(curve[i].mean, again[i].mean);
}

TEST(CrossValidation, FoldStatistics) {
    const auto ds = blobs(5, 2, 25, 2.0);
    const auto r = k_fold(ds, ModelKind::Svm, 5, {}, 8);
    ASSERT_EQ(r.fold_accuracy.size(), 5u);
    double mean = 0.0;
    for (double a : r.fold_accuracy) mean += a / 5.0;
    double var = 0.0;
    for (double a : r.fold_accuracy) var += (a - mean) * (a - mean) / 5.0;
    EXPECT_NEAR(r.mean, mean, 1e-15);
    EXPECT_NEAR(r.std, std::sqrt(var), 1e-15);
}

TEST(CrossValidation, DefaultGrid) {
    EXPECT_EQ(default_size_grid(300), (std::vector<long>{30, 60, 90, 120, 150, 180, 210, 240, 270, 300}));
    EXPECT_EQ(default_size_grid(100, 4), (std::vector<long>{25, 50, 75, 100}));
}

TEST(ModelDocuments, RoundTripPreservesPredictions) {
    const auto ds = blobs(6, 3, 30, 1.5);
    const auto probe = blobs(7, 3, 20, 2.5);
    const auto dir = std::filesystem::temp_directory_path() / "rydberg_id_tests";
    std::filesystem::create_directories(dir);
    for (auto kind : {ModelKind::Svm, ModelKind::Forest}) {
        ModelHyperparameters hp;
        hp.forest.n_trees = 15;
        const auto model = train_model(kind, ds, hp);
        const auto path = (dir / ("model-" + to_string(kind) + ".json")).string();
        save_model(model, path);
        const auto back = load_model(path);
        EXPECT_EQ(kind_of(back), kind);
        for (const auto& s : probe.samples) EXPECT_EQ(predict(back, s.features), predict(model, s.features));
        EXPECT_EQ(to_json(back), to_json(model));
    }
}

TEST(ModelDocuments, RejectsForeignDocuments) {
    const auto j = to_json(train_model(ModelKind::Svm, blobs(8, 2, 10, 1.0)));
    EXPECT_EQ(j.at("version"), kModelFormatVersion);
    auto bad_version = j;
    bad_version["version"] = kModelFormatVersion + 1;
    EXPECT_THROW(model_from_json(bad_version), std::runtime_error);
    auto bad_format = j;
    bad_format["format"] = "other";
    EXPECT_THROW(model_from_json(bad_format), std::runtime_error);
    auto bad_kind = j;
    bad_kind["kind"] = "knn";
    EXPECT_THROW(model_from_json(bad_kind), std::runtime_error);
    auto bad_bias = j;
    bad_bias["bias"].push_back(0.0);
    EXPECT_THROW(model_from_json(bad_bias), std::runtime_error);
    EXPECT_THROW(load_model("/nonexistent/model.json"), std::runtime_error);
}
