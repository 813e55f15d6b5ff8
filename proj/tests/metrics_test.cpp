#include <gtest/gtest.h>

#include <cmath>

#include "emap/metrics.hpp"
#include "emap/models/model.hpp"
#include "test_util.hpp"

namespace emap::metrics {
namespace {

using testing::gaussian_dataset;

// AUC by enumerating every (positive, negative) pair; ties count one half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t b = 0; b < s.size(); ++b)
            if (y[a] && !y[b]) {
                pairs += 1;
                wins += s[a] > s[b] ? 1.0 : s[a] == s[b] ? 0.5 : 0.0;
            }
    return wins / pairs;
}

Matrix rows(std::initializer_list<std::initializer_list<double>> r) { return Matrix(r); }

TEST(Auc, SpecExamples) {
    EXPECT_EQ(auc_binary(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}), 1.0);
    EXPECT_EQ(auc_binary(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}), 0.5);
    EXPECT_EQ(auc_binary(std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 1}), 0.5);
}

TEST(Auc, MatchesPairEnumerationWithTies) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.below(60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(7));  // many ties
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 0;
        y[1] = 1;
        EXPECT_NEAR(auc_binary(s, y), pairwise_auc(s, y), 1e-12);
    }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
    Rng rng(2);
    std::vector<double> s(80), t(80);
    std::vector<int> y(80);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.normal();
        t[i] = std::exp(3 * s[i]) - 7;
        y[i] = static_cast<int>(i % 3 == 0);
    }
    EXPECT_EQ(auc_binary(s, y), auc_binary(t, y));
}

TEST(Auc, SingleClassIsUndefined) {
    EXPECT_THROW(auc_binary(std::vector<double>{1, 2}, std::vector<int>{1, 1}), UndefinedMetric);
    EXPECT_THROW(auc_macro_ovr(rows({{0, 1}, {1, 0}}), std::vector<int>{0, 0}), UndefinedMetric);
}

TEST(Auc, BinaryMacroEqualsLogitDifferenceAuc) {
    Rng rng(3);
    Matrix l(40, 2);
    std::vector<int> y(40);
    std::vector<double> diff(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        l(i, 0) = rng.normal();
        l(i, 1) = rng.normal();
        y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
        diff[static_cast<std::size_t>(i)] = l(i, 1) - l(i, 0);
    }
    EXPECT_EQ(auc_macro_ovr(l, y), pairwise_auc(diff, y));
}

TEST(Auc, MacroOvrMatchesSoftmaxOracle) {
    Rng rng(4);
    const Eigen::Index n = 60, c = 4;
    Matrix l(n, c);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) l(i, k) = rng.normal();
        y[static_cast<std::size_t>(i)] = static_cast<int>(i % c);
    }
    double total = 0;
    for (Eigen::Index k = 0; k < c; ++k) {
        std::vector<double> p(static_cast<std::size_t>(n));
        std::vector<int> is_k(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            double z = 0;
            for (Eigen::Index q = 0; q < c; ++q) z += std::exp(l(i, q));
            p[static_cast<std::size_t>(i)] = std::exp(l(i, k)) / z;
            is_k[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] == k;
        }
        total += pairwise_auc(p, is_k);
    }
    EXPECT_NEAR(auc_macro_ovr(l, y), total / c, 1e-12);
}

TEST(Accuracy, TiesGoToLowestClass) {
    EXPECT_EQ(accuracy(rows({{1, 1}, {0, 2}, {3, 3}}), std::vector<int>{0, 1, 1}), 2.0 / 3.0);
}

TEST(Accuracy, InvariantUnderConstantShift) {
    const Matrix l = rows({{0.2, 0.5, 0.1}, {2, 1, 0}, {0, 0, 3}});
    const std::vector<int> y = {1, 0, 0};
    Matrix shifted = l;
    shifted.rowwise() += Eigen::RowVector3d(5, 5, 5);
    EXPECT_EQ(accuracy(l, y), accuracy(shifted, y));
    EXPECT_EQ(accuracy(l, y), 2.0 / 3.0);
}

TEST(WeightedF1, HandComputed) {
    // Per class F1: 0.5 (support 2), 0.8 (support 2), 0 (support 1).
    const Matrix l = rows({{1, 0, 0}, {0, 1, 0}, {0, 1, 0}, {0, 1, 0}, {1, 0, 0}});
    EXPECT_NEAR(weighted_f1(l, std::vector<int>{0, 0, 1, 1, 2}), 0.52, 1e-15);
    EXPECT_EQ(weighted_f1(l, std::vector<int>{0, 1, 1, 1, 0}), 1.0);
}

TEST(Agreement, Examples) {
    const Matrix a = rows({{1, 2, 0}, {3, 1, 2}, {0, 0.5, 1}});
    EXPECT_EQ(agreement(a, a), 1.0);
    Matrix b = a;
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        Eigen::Index top, second = -1;
        b.row(i).maxCoeff(&top);
        for (Eigen::Index k = 0; k < b.cols(); ++k)
            if (k != top && (second < 0 || b(i, k) > b(i, second))) second = k;
        std::swap(b(i, top), b(i, second));
    }
    EXPECT_EQ(agreement(a, b), 0.0);
    EXPECT_EQ(agreement(b, a), 0.0);
    EXPECT_THROW(agreement(a, a.leftCols(2)), InputError);
}

TEST(Agreement, SymmetricOnRandomPredictions) {
    Rng rng(6);
    Matrix a(30, 3), b(30, 3);
    for (auto& x : a.reshaped()) x = static_cast<double>(rng.below(3));
    for (auto& x : b.reshaped()) x = static_cast<double>(rng.below(3));
    EXPECT_EQ(agreement(a, b), agreement(b, a));
}

TEST(DisagreementAdvantage, Examples) {
    const Matrix right = rows({{0, 1}, {1, 0}, {0, 1}, {1, 0}});
    const Matrix wrong = rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
    const std::vector<int> y = {1, 0, 1, 0};
    EXPECT_EQ(disagreement_advantage(right, wrong, y), 1.0);
    EXPECT_EQ(disagreement_advantage(wrong, right, y), 0.0);
    Matrix half = right;
    half.row(0) = wrong.row(0);
    half.row(1) = wrong.row(1);
    Matrix other = wrong;
    other.row(0) = right.row(0);
    other.row(1) = right.row(1);
    EXPECT_EQ(disagreement_advantage(half, other, y), 0.5);
    EXPECT_FALSE(disagreement_advantage(right, right, y).has_value());
}

models::Model linear_model(std::uint64_t seed) {
    const auto ds = gaussian_dataset(200, 3, 2, seed, [](const auto& t, const auto& v) { return t(0) - v(1) > 0; });
    return models::train_linear(ds, {});
}

PairedDataset eval_set(std::size_t n, std::uint64_t seed) {
    return gaussian_dataset(n, 3, 2, seed, [](const auto& t, const auto& v) { return t(0) * v(1) > 0; });
}

TEST(Subsample, DrawsAreSortedDistinctAndSeeded) {
    const auto a = draw_subsample(100, 30, 7, 0);
    ASSERT_EQ(a.size(), 30u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
    EXPECT_LT(a.back(), 100u);
    EXPECT_EQ(a, draw_subsample(100, 30, 7, 0));
    EXPECT_NE(a, draw_subsample(100, 30, 7, 1));
    const auto all = draw_subsample(10, 10, 7, 3);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(all[k], k);
}

TEST(Subsample, FullSetReproducesWholeSetMetricsExactly) {
    const auto m = linear_model(1);
    const auto ds = eval_set(60, 2);
    for (auto metric : {Metric::accuracy, Metric::auc, Metric::weighted_f1}) {
        const auto r = subsampled_emap_metric(m, ds, 1, ds.size(), metric, 9);
        EXPECT_EQ(r.direct_mean, evaluate(metric, models::predict_paired(m, ds.t, ds.v), ds.labels));
        const auto grid = models::model_grid(m, ds.t, ds.v);
        EXPECT_EQ(r.emap_mean, evaluate(metric, emap_predictions(emap_decompose(grid)), ds.labels));
        EXPECT_EQ(r.direct_std, 0.0);
    }
}

TEST(Subsample, AdditiveModelEmapEqualsDirect) {
    const auto m = linear_model(3);
    const auto ds = eval_set(300, 4);
    const auto r = subsampled_emap_metric(m, ds, 6, 50, Metric::auc, 5);
    ASSERT_EQ(r.direct.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(r.direct[k], r.emap[k], 1e-8);
    EXPECT_GT(r.direct_std, 0.0);
    const auto [mean, sd] = mean_std(r.direct);
    EXPECT_EQ(mean, r.direct_mean);
    EXPECT_EQ(sd, r.direct_std);
}

TEST(Subsample, DeterministicAndThreadIndependent) {
    const auto m = linear_model(5);
    const auto ds = eval_set(200, 6);
    const auto a = subsampled_emap_metric(m, ds, 4, 40, Metric::accuracy, 11, 1);
    const auto b = subsampled_emap_metric(m, ds, 4, 40, Metric::accuracy, 11, 3);
    EXPECT_EQ(a.direct, b.direct);
    EXPECT_EQ(a.emap, b.emap);
}

TEST(Subsample, RejectsBadSizes) {
    const auto m = linear_model(7);
    const auto ds = eval_set(20, 8);
    EXPECT_THROW(subsampled_emap_metric(m, ds, 1, 21, Metric::accuracy, 0), InputError);
    EXPECT_THROW(subsampled_emap_metric(m, ds, 0, 5, Metric::accuracy, 0), InputError);
}

TEST(MeanStd, SampleStandardDeviation) {
    const auto [m, s] = mean_std({1.0, 2.0, 3.0, 4.0});
    EXPECT_EQ(m, 2.5);
    EXPECT_NEAR(s, std::sqrt(5.0 / 3.0), 1e-15);
}

TEST(Report, LinearModelAgreesWithItsEmap) {
    const auto m = linear_model(9);
    const auto ds = eval_set(40, 10);
    const auto r = evaluate_model(m, ds, "test", true);
    EXPECT_EQ(r.agreement_rate, 1.0);
    EXPECT_FALSE(r.orig_better_frac.has_value());
    ASSERT_EQ(r.predictors.size(), 4u);
    EXPECT_EQ(r.predictors[0].second.accuracy, r.predictors[1].second.accuracy);
    const auto j = report_to_json(r);
    EXPECT_TRUE(j["orig_better_frac"].is_null());
    EXPECT_EQ(j["agreement_rate"], 1.0);
    EXPECT_NE(j["auc_convention"].get<std::string>().find("one-vs-rest"), std::string::npos);
    const std::string csv = report_to_csv(r);
    EXPECT_EQ(csv.rfind("# ", 0), 0u);
    EXPECT_NE(csv.find("\npredictor,metric,value\n"), std::string::npos);
    EXPECT_NE(csv.find("model_vs_emap,agreement_rate,1\n"), std::string::npos);
    EXPECT_NE(csv.find("model_vs_emap,orig_better_frac,\n"), std::string::npos);
}

TEST(Report, UndefinedAucIsAbsent) {
    const auto m = linear_model(11);
    auto ds = eval_set(10, 12);
    ds.labels.assign(10, 1);
    const auto r = evaluate_model(m, ds, "test", false);
    EXPECT_FALSE(r.predictors[0].second.auc.has_value());
    EXPECT_TRUE(report_to_json(r)["predictors"]["model"]["auc"].is_null());
}

}  // namespace
}  // namespace emap::metrics
