#pragma once

// Classification metrics, prediction-set agreement, and the subsampled EMAP
// protocol (k random m-item subsets, each projected on its own m x m grid).
//
// Conventions: argmax ties go to the lowest class index. AUC uses average
// ranks for tied scores. Multiclass AUC is the unweighted mean of per-class
// one-vs-rest AUCs, each scored by l_c - logsumexp_{k != c} l_k (monotone in
// the softmax probability of c); for two classes it equals the binary AUC on
// l_1 - l_0.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "emap/dataset.hpp"
#include "emap/error.hpp"
#include "emap/grid.hpp"
#include "emap/io.hpp"
#include "emap/models/model.hpp"
#include "emap/rng.hpp"

namespace emap::metrics {

inline constexpr const char* kAucConvention =
    "auc is binary Mann-Whitney AUC with average ranks for ties; for more than two classes it is the "
    "macro one-vs-rest mean";

inline int argmax_row(const Matrix& m, Eigen::Index i) {
    int best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
        if (m(i, c) > m(i, best)) best = static_cast<int>(c);
    return best;
}

inline std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_row(m, i);
    return out;
}

namespace detail {
inline void require_rows(const Matrix& m, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != n) throw InputError(std::string(what) + ": row count differs from labels");
    if (m.cols() < 1) throw InputError(std::string(what) + ": no columns");
}
}  // namespace detail

inline double accuracy(const Matrix& logits, std::span<const int> labels) {
    detail::require_rows(logits, labels.size(), "accuracy");
    if (labels.empty()) throw UndefinedMetric("accuracy of an empty set");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += argmax_row(logits, static_cast<Eigen::Index>(i)) == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Rank-sum AUC of `scores` for positives (label != 0) vs negatives.
inline double auc_binary(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InputError("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n;) {
        std::size_t e = k;
        while (e < n && scores[order[e]] == scores[order[k]]) ++e;
        const double avg_rank = 0.5 * static_cast<double>(k + 1 + e);  // ranks k+1..e
        for (std::size_t q = k; q < e; ++q)
            if (labels[order[q]] != 0) {
                pos_rank_sum += avg_rank;
                ++pos;
            }
        k = e;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetric("auc is undefined when only one class is present");
    const double p = static_cast<double>(pos), q = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

/// One-vs-rest score of class c for each row.
inline std::vector<double> ovr_scores(const Matrix& logits, Eigen::Index c) {
    std::vector<double> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < logits.cols(); ++k)
            if (k != c) m = std::max(m, logits(i, k));
        double s = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k)
            if (k != c) s += std::exp(logits(i, k) - m);
        out[static_cast<std::size_t>(i)] = logits(i, c) - (m + std::log(s));
    }
    return out;
}

/// Macro one-vs-rest AUC over classes that have both positives and negatives.
inline double auc_macro_ovr(const Matrix& logits, std::span<const int> labels) {
    detail::require_rows(logits, labels.size(), "auc");
    if (logits.cols() < 2) throw InputError("auc needs at least two logit columns");
    if (logits.cols() == 2) {
        std::vector<double> s(labels.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = logits(static_cast<Eigen::Index>(i), 1) - logits(static_cast<Eigen::Index>(i), 0);
        return auc_binary(s, labels);
    }
    double total = 0.0;
    int used = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        std::vector<int> is_c(labels.size());
        std::size_t count = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) count += (is_c[i] = labels[i] == c);
        if (count == 0 || count == labels.size()) continue;
        total += auc_binary(ovr_scores(logits, c), is_c);
        ++used;
    }
    if (used == 0) throw UndefinedMetric("auc is undefined when only one class is present");
    return total / used;
}

/// Support-weighted mean of per-class F1 (a class with no predicted and no
/// true items contributes nothing; F1 is 0 when precision + recall = 0).
inline double weighted_f1(const Matrix& logits, std::span<const int> labels) {
    detail::require_rows(logits, labels.size(), "weighted_f1");
    if (labels.empty()) throw UndefinedMetric("weighted_f1 of an empty set");
    const auto pred = argmax_rows(logits);
    int classes = static_cast<int>(logits.cols());
    for (int y : labels) classes = std::max(classes, y + 1);
    std::vector<double> tp(static_cast<std::size_t>(classes)), fp(tp), fn(tp);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]), p = static_cast<std::size_t>(pred[i]);
        if (y == p) tp[y] += 1;
        else {
            fp[p] += 1;
            fn[y] += 1;
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < tp.size(); ++c) {
        const double support = tp[c] + fn[c];
        if (support == 0) continue;
        const double denom = 2 * tp[c] + fp[c] + fn[c];
        total += support * (denom > 0 ? 2 * tp[c] / denom : 0.0);
    }
    return total / static_cast<double>(labels.size());
}

/// Fraction of rows where both prediction sets pick the same argmax.
inline double agreement(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("agreement: prediction shapes differ");
    if (a.rows() == 0) throw UndefinedMetric("agreement of empty prediction sets");
    std::size_t same = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) same += argmax_row(a, i) == argmax_row(b, i);
    return static_cast<double>(same) / static_cast<double>(a.rows());
}

/// Among rows where the argmaxes differ and exactly one is correct, the
/// fraction where `a` is correct; empty when there is no such row.
inline std::optional<double> disagreement_advantage(const Matrix& a, const Matrix& b, std::span<const int> labels) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("disagreement_advantage: shapes differ");
    detail::require_rows(a, labels.size(), "disagreement_advantage");
    std::size_t a_better = 0, b_better = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const int pa = argmax_row(a, i), pb = argmax_row(b, i), y = labels[static_cast<std::size_t>(i)];
        if (pa == pb) continue;
        a_better += pa == y;
        b_better += pb == y;
    }
    if (a_better + b_better == 0) return std::nullopt;
    return static_cast<double>(a_better) / static_cast<double>(a_better + b_better);
}

enum class Metric { accuracy, auc, weighted_f1 };

inline const char* metric_name(Metric m) {
    switch (m) {
        case Metric::accuracy: return "accuracy";
        case Metric::auc: return "auc";
        case Metric::weighted_f1: return "weighted_f1";
    }
    return "?";
}

inline Metric parse_metric(const std::string& s) {
    if (s == "accuracy" || s == "acc") return Metric::accuracy;
    if (s == "auc") return Metric::auc;
    if (s == "weighted_f1" || s == "f1") return Metric::weighted_f1;
    throw InputError("unknown metric: " + s);
}

inline double evaluate(Metric metric, const Matrix& logits, std::span<const int> labels) {
    switch (metric) {
        case Metric::accuracy: return accuracy(logits, labels);
        case Metric::auc: return auc_macro_ovr(logits, labels);
        case Metric::weighted_f1: return weighted_f1(logits, labels);
    }
    return 0.0;
}

/// Mean and sample standard deviation (0 for a single value).
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

struct SubsampleResult {
    std::size_t k = 0;
    std::size_t m = 0;
    std::uint64_t seed = 0;
    Metric metric = Metric::accuracy;
    std::vector<double> direct;  // per subsample
    std::vector<double> emap;
    double direct_mean = 0.0, direct_std = 0.0;
    double emap_mean = 0.0, emap_std = 0.0;
};

/// Subsample r draws m distinct items from its own stream (partial
/// Fisher-Yates), sorted ascending, so m = N selects the items in order.
inline std::vector<std::size_t> draw_subsample(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t r) {
    Rng rng(stream_seed(seed, streams::kSubsample, r));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
    perm.resize(m);
    std::sort(perm.begin(), perm.end());
    return perm;
}

/// Direct and EMAP metric over k subsamples of m items of `data` (all items,
/// regardless of split tags).
inline SubsampleResult subsampled_emap_metric(const models::Model& model, const PairedDataset& data, std::size_t k,
                                              std::size_t m, Metric metric, std::uint64_t seed, unsigned threads = 1) {
    if (k < 1) throw InputError("subsample count k must be >= 1");
    if (m < 1 || m > data.size())
        throw InputError("subsample size m = " + std::to_string(m) + " must lie in [1, " + std::to_string(data.size()) +
                         "]");
    SubsampleResult out;
    out.k = k;
    out.m = m;
    out.seed = seed;
    out.metric = metric;
    for (std::size_t r = 0; r < k; ++r) {
        const PairedDataset sub = data.subset(draw_subsample(data.size(), m, seed, r));
        out.direct.push_back(evaluate(metric, models::predict_paired(model, sub.t, sub.v), sub.labels));
        const ScoreGrid grid = models::model_grid(model, sub.t, sub.v, threads);
        out.emap.push_back(evaluate(metric, emap_predictions(emap_decompose(grid)), sub.labels));
    }
    std::tie(out.direct_mean, out.direct_std) = mean_std(out.direct);
    std::tie(out.emap_mean, out.emap_std) = mean_std(out.emap);
    return out;
}

// ---- reports -----------------------------------------------------------------

struct MetricSet {
    std::optional<double> accuracy;
    std::optional<double> auc;  // absent when undefined
    std::optional<double> weighted_f1;
};

inline MetricSet compute_metrics(const Matrix& logits, std::span<const int> labels) {
    MetricSet s;
    s.accuracy = accuracy(logits, labels);
    s.weighted_f1 = weighted_f1(logits, labels);
    try {
        s.auc = auc_macro_ovr(logits, labels);
    } catch (const UndefinedMetric&) {
    }
    return s;
}

struct EvalReport {
    std::string model_kind;
    std::string split;
    std::size_t items = 0;
    // Predictor name -> metrics. "model" is the direct paired prediction;
    // "emap" the projection; "emap_text_only" / "emap_visual_only" keep a
    // single additive component (tau + mu, phi + mu) as unimodal baselines.
    std::vector<std::pair<std::string, MetricSet>> predictors;
    std::optional<double> agreement_rate;
    std::optional<double> orig_better_frac;
    std::optional<double> projection_loss;
    std::optional<SubsampleResult> subsample;
};

namespace detail {
inline io::json opt(const std::optional<double>& x) { return x ? io::json(*x) : io::json(nullptr); }
}  // namespace detail

inline io::json report_to_json(const EvalReport& r) {
    io::json j;
    j["auc_convention"] = kAucConvention;
    j["model_kind"] = r.model_kind;
    j["split"] = r.split;
    j["items"] = r.items;
    io::json preds = io::json::object();
    for (const auto& [name, s] : r.predictors)
        preds[name] = {{"accuracy", detail::opt(s.accuracy)},
                       {"auc", detail::opt(s.auc)},
                       {"weighted_f1", detail::opt(s.weighted_f1)}};
    j["predictors"] = preds;
    j["agreement_rate"] = detail::opt(r.agreement_rate);
    j["orig_better_frac"] = detail::opt(r.orig_better_frac);
    j["projection_loss"] = detail::opt(r.projection_loss);
    if (r.subsample) {
        const auto& s = *r.subsample;
        j["subsample"] = {{"k", s.k},
                          {"m", s.m},
                          {"seed", s.seed},
                          {"metric", metric_name(s.metric)},
                          {"direct", s.direct},
                          {"emap", s.emap},
                          {"direct_mean", s.direct_mean},
                          {"direct_std", s.direct_std},
                          {"emap_mean", s.emap_mean},
                          {"emap_std", s.emap_std}};
    } else {
        j["subsample"] = nullptr;
    }
    return j;
}

namespace detail {
inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}
}  // namespace detail

/// One "predictor,metric,value" row per value; absent values are left empty.
inline std::string report_to_csv(const EvalReport& r) {
    std::string out = std::string("# ") + kAucConvention + "\npredictor,metric,value\n";
    auto row = [&](const std::string& p, const std::string& m, const std::optional<double>& v) {
        out += p + "," + m + "," + (v ? detail::fmt(*v) : "") + "\n";
    };
    for (const auto& [name, s] : r.predictors) {
        row(name, "accuracy", s.accuracy);
        row(name, "auc", s.auc);
        row(name, "weighted_f1", s.weighted_f1);
    }
    row("model_vs_emap", "agreement_rate", r.agreement_rate);
    row("model_vs_emap", "orig_better_frac", r.orig_better_frac);
    row("emap", "projection_loss", r.projection_loss);
    if (r.subsample) {
        const std::string metric = metric_name(r.subsample->metric);
        row("model", "subsample_" + metric + "_mean", r.subsample->direct_mean);
        row("model", "subsample_" + metric + "_std", r.subsample->direct_std);
        row("emap", "subsample_" + metric + "_mean", r.subsample->emap_mean);
        row("emap", "subsample_" + metric + "_std", r.subsample->emap_std);
    }
    return out;
}

/// Full evaluation of `model` on `data` (one split). With `with_emap`, builds
/// the items x items grid, projects it and compares.
inline EvalReport evaluate_model(const models::Model& model, const PairedDataset& data, const std::string& split,
                                 bool with_emap, unsigned threads = 1) {
    if (data.size() == 0) throw InputError("evaluation set is empty");
    EvalReport r;
    r.model_kind = models::kind_name(model);
    r.split = split;
    r.items = data.size();
    const Matrix direct = models::predict_paired(model, data.t, data.v);
    r.predictors.emplace_back("model", compute_metrics(direct, data.labels));
    if (with_emap) {
        const ScoreGrid grid = models::model_grid(model, data.t, data.v, threads);
        const AdditiveDecomposition dec = emap_decompose(grid);
        const Matrix projected = emap_predictions(dec);
        r.predictors.emplace_back("emap", compute_metrics(projected, data.labels));
        const Matrix text_only = dec.tau.rowwise() + dec.mu.transpose();
        const Matrix visual_only = dec.phi.rowwise() + dec.mu.transpose();
        r.predictors.emplace_back("emap_text_only", compute_metrics(text_only, data.labels));
        r.predictors.emplace_back("emap_visual_only", compute_metrics(visual_only, data.labels));
        r.agreement_rate = agreement(direct, projected);
        r.orig_better_frac = disagreement_advantage(direct, projected, data.labels);
        r.projection_loss = projection_loss(grid, dec);
    }
    return r;
}

}  // namespace emap::metrics
