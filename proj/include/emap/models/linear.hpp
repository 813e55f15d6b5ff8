#pragma once

// Multinomial logistic regression on the concatenated [t; v] features:
// logits = w_t^T t + w_v^T v + b. Additive across modalities by construction.

#include "emap/models/common.hpp"
#include "emap/rng.hpp"

namespace emap::models {

struct LinearConfig {
    double l2 = 1e-4;
    double lr = 1.0;
    std::size_t epochs = 300;
    std::uint64_t seed = 0;
};

struct LinearModel {
    Matrix w_t;  // d1 x C
    Matrix w_v;  // d2 x C
    Eigen::RowVectorXd b;
    LinearConfig config;

    std::size_t d1() const { return static_cast<std::size_t>(w_t.rows()); }
    std::size_t d2() const { return static_cast<std::size_t>(w_v.rows()); }
    std::size_t num_classes() const { return static_cast<std::size_t>(b.size()); }

    /// Logits for paired rows of t and v.
    Matrix logits(const Matrix& t, const Matrix& v) const { return ((t * w_t + v * w_v).rowwise() + b); }

    /// Grid row: text `t` against every visual row.
    void score_row(std::span<const double> t, const Matrix& visuals, std::span<double> out) const {
        const Eigen::RowVectorXd text_part = as_row(t) * w_t + b;
        Eigen::Map<Matrix> dst(out.data(), visuals.rows(), b.size());
        dst = (visuals * w_v).rowwise() + text_part;
    }

    std::vector<double> predict(std::span<const double> t, std::span<const double> v) const {
        const Eigen::RowVectorXd out = as_row(t) * w_t + as_row(v) * w_v + b;
        return {out.begin(), out.end()};
    }

    void validate() const {
        if (w_t.cols() != b.size() || w_v.cols() != b.size()) throw InputError("linear model: class counts differ");
        if (!w_t.allFinite() || !w_v.allFinite() || !b.allFinite()) throw InputError("linear model: non-finite weights");
    }
};

/// Full-batch gradient descent on standardized features with halving on
/// loss increase; standardization is folded back into raw-space weights.
inline LinearModel train_linear(const PairedDataset& data, const LinearConfig& cfg,
                                std::vector<double>* loss_trace = nullptr) {
    const auto idx = require_train_split(data);
    const PairedDataset train = data.subset(idx);
    const auto d1 = train.t.cols(), d2 = train.v.cols();
    const auto classes = static_cast<Eigen::Index>(data.num_classes);

    Matrix x(train.t.rows(), d1 + d2);
    x << train.t, train.v;
    const Standardizer std_x = Standardizer::fit(x);
    const Matrix z = std_x.apply(x);

    Rng rng(stream_seed(cfg.seed, streams::kInit));
    Matrix w(d1 + d2, classes);
    for (auto& e : w.reshaped<Eigen::RowMajor>()) e = 0.01 * rng.normal();
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(classes);

    fit_softmax_regression(z, train.labels, w, b, {cfg.lr, 0.0, cfg.l2, cfg.epochs}, loss_trace);

    // z = (x - mean) / scale  =>  z W + b = x (W / scale) + (b - (mean / scale) W)
    const Matrix w_raw = w.array().colwise() / std_x.scale.transpose().array();
    LinearModel m;
    m.w_t = w_raw.topRows(d1);
    m.w_v = w_raw.bottomRows(d2);
    m.b = b - std_x.mean * w_raw;
    m.config = cfg;
    return m;
}

}  // namespace emap::models
