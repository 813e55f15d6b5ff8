#pragma once

// How well additive models fit boolean tables: the EMAP of the table itself,
// AdaBoost restricted to unimodal trees, and unrestricted AdaBoost as the
// interactive reference. All fits use every one of the 4^n cells as training
// data and report training AUC.

#include <string>
#include <vector>

#include "emap/grid.hpp"
#include "emap/logic.hpp"
#include "emap/metrics.hpp"
#include "emap/models/adaboost.hpp"
#include "emap/numeric.hpp"

namespace emap::logic {

enum class FitMethod { emap, adaboost_unimodal, adaboost_full };

inline constexpr FitMethod kFitMethods[] = {FitMethod::emap, FitMethod::adaboost_unimodal, FitMethod::adaboost_full};

inline const char* method_name(FitMethod m) {
    switch (m) {
        case FitMethod::emap: return "emap";
        case FitMethod::adaboost_unimodal: return "adaboost_unimodal";
        case FitMethod::adaboost_full: return "adaboost_full";
    }
    return "?";
}

inline FitMethod parse_method(const std::string& s) {
    for (auto m : kFitMethods)
        if (s == method_name(m)) return m;
    throw InputError("unknown fit method: " + s);
}

struct FitConfig {
    std::size_t stages = 200;
    std::size_t max_depth = 15;
};

/// Score for every cell (row-major, same order as table.cells).
inline std::vector<double> additive_fit_scores(const BooleanTable& table, FitMethod method, const FitConfig& cfg = {}) {
    const std::size_t m = table.side();
    std::vector<double> scores(m * m);
    if (method == FitMethod::emap) {
        ScoreGrid grid(m, m, 1);
        for (std::size_t k = 0; k < scores.size(); ++k) grid.values[k] = table.cells[k];
        const AdditiveDecomposition dec = emap_decompose(grid);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) scores[i * m + j] = dec.value(i, j, 0);
        return scores;
    }
    if (table.constant()) throw UndefinedMetric("boosting needs a nonconstant table");
    const auto n = static_cast<std::size_t>(table.n);
    Matrix x(static_cast<Eigen::Index>(m * m), static_cast<Eigen::Index>(2 * n));
    std::vector<int> y(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const auto row = static_cast<Eigen::Index>(i * m + j);
            for (std::size_t b = 0; b < n; ++b) {
                x(row, static_cast<Eigen::Index>(b)) = static_cast<double>((i >> b) & 1);
                x(row, static_cast<Eigen::Index>(n + b)) = static_cast<double>((j >> b) & 1);
            }
            y[i * m + j] = table.at(i, j);
        }
    models::AdaBoostConfig bc;
    bc.stages = cfg.stages;
    bc.max_depth = cfg.max_depth;
    bc.restriction =
        method == FitMethod::adaboost_full ? models::BoostRestriction::full : models::BoostRestriction::unimodal;
    models::BoostState state(std::move(x), std::move(y), n, n, bc);
    while (!state.done) models::boost_round(state);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const auto s = state.model.scores(state.features.row(static_cast<Eigen::Index>(k)));
        scores[k] = s[1] - s[0];
    }
    return scores;
}

/// Training AUC of the additive (or reference) fit against the table.
inline double additive_fit_auc(const BooleanTable& table, FitMethod method, const FitConfig& cfg = {}) {
    if (table.constant()) throw UndefinedMetric("auc is undefined for a constant table");
    const auto scores = additive_fit_scores(table, method, cfg);
    std::vector<int> labels(table.cells.begin(), table.cells.end());
    return metrics::auc_binary(scores, labels);
}

struct Fig2Row {
    int n = 0;
    FitMethod method = FitMethod::emap;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::size_t samples = 0;
    std::vector<double> aucs;  // per sample, in sample order
};

struct Fig2Options {
    int n_min = 1;
    int n_max = 4;
    std::size_t samples = 2000;
    std::uint64_t seed = 0;
    Sampler sampler = Sampler::truth_table;
    FitConfig fit;
    unsigned threads = 1;
};

/// Sample `samples` nonconstant functions per n and fit all three methods.
/// Sample s of size n draws from its own stream, so the result does not
/// depend on evaluation order or thread count.
inline std::vector<Fig2Row> run_fig2(const Fig2Options& opt) {
    if (opt.n_min < 1 || opt.n_max < opt.n_min || opt.n_max > kMaxBits)
        throw InputError("n range must satisfy 1 <= A <= B <= 8");
    if (opt.samples == 0) throw InputError("samples must be >= 1");
    std::vector<Fig2Row> rows;
    for (int n = opt.n_min; n <= opt.n_max; ++n) {
        std::vector<std::array<double, 3>> aucs(opt.samples);
        parallel_for(opt.samples, opt.threads, [&](std::size_t s) {
            Rng rng(stream_seed(opt.seed, streams::kTable, (static_cast<std::uint64_t>(n) << 32) | s));
            const BooleanTable t = sample_function(n, rng, true, opt.sampler);
            for (std::size_t k = 0; k < 3; ++k) aucs[s][k] = additive_fit_auc(t, kFitMethods[k], opt.fit);
        });
        for (std::size_t k = 0; k < 3; ++k) {
            Fig2Row row;
            row.n = n;
            row.method = kFitMethods[k];
            row.samples = opt.samples;
            for (const auto& a : aucs) row.aucs.push_back(a[k]);
            std::tie(row.mean_auc, row.std_auc) = metrics::mean_std(row.aucs);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

inline std::string fig2_csv(const std::vector<Fig2Row>& rows) {
    std::string out = "n,method,mean_auc,std_auc,samples\n";
    for (const auto& r : rows)
        out += std::to_string(r.n) + "," + method_name(r.method) + "," + metrics::detail::fmt(r.mean_auc) + "," +
               metrics::detail::fmt(r.std_auc) + "," + std::to_string(r.samples) + "\n";
    return out;
}

}  // namespace emap::logic
