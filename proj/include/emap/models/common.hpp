#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emap/dataset.hpp"
#include "emap/error.hpp"
#include "emap/numeric.hpp"

namespace emap::models {

inline Eigen::Map<const Eigen::RowVectorXd> as_row(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

/// Per-column z-scoring fitted on training rows; constant columns keep scale 1.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        const double n = static_cast<double>(x.rows());
        s.mean = x.colwise().sum() / n;
        s.scale = ((x.rowwise() - s.mean).array().square().colwise().sum() / n).sqrt().matrix();
        for (auto& v : s.scale)
            if (!(v > 1e-12)) v = 1.0;
        return s;
    }

    Matrix apply(const Matrix& x) const {
        return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
    }
};

/// Mean softmax cross-entropy of `logits` against `labels`; on return
/// `grad` holds d(loss)/d(logits) = (softmax - onehot) / N.
inline double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels, Matrix& grad) {
    const Eigen::Index n = logits.rows();
    grad.resize(n, logits.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
        const double z = e.sum();
        const int y = labels[static_cast<std::size_t>(i)];
        total += std::log(z) - (logits(i, y) - m);
        grad.row(i) = e / z;
        grad(i, y) -= 1.0;
    }
    grad /= static_cast<double>(n);
    return total / static_cast<double>(n);
}

inline std::vector<int> train_labels(const PairedDataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto k : idx) out.push_back(ds.labels[k]);
    return out;
}

inline std::vector<std::size_t> require_train_split(const PairedDataset& ds) {
    ds.validate();
    auto idx = ds.indices(Split::train);
    if (idx.empty()) throw InputError("training requires a non-empty train split");
    return idx;
}

/// Settings shared by the full-batch softmax-regression trainers.
struct GradientDescentSettings {
    double lr = 1.0;
    double momentum = 0.0;
    double l2 = 0.0;
    std::size_t epochs = 100;
};

/// Full-batch gradient descent on softmax regression over features `x`
/// (rows = items) with weights w (F x C) and bias b (C). A step whose loss
/// exceeds the current loss is rejected, the learning rate is halved and the
/// momentum buffer cleared, so the recorded loss never increases.
inline void fit_softmax_regression(const Matrix& x, const std::vector<int>& labels, Matrix& w, Eigen::RowVectorXd& b,
                                   const GradientDescentSettings& s, std::vector<double>* trace) {
    Matrix grad_logits;
    auto objective = [&](const Matrix& wt, const Eigen::RowVectorXd& bt, Matrix* gw, Eigen::RowVectorXd* gb) {
        const Matrix logits = (x * wt).rowwise() + bt;
        double loss = softmax_cross_entropy(logits, labels, grad_logits);
        loss += 0.5 * s.l2 * wt.squaredNorm();
        if (gw) {
            *gw = x.transpose() * grad_logits + s.l2 * wt;
            *gb = grad_logits.colwise().sum();
        }
        return loss;
    };

    Matrix gw;
    Eigen::RowVectorXd gb;
    double loss = objective(w, b, &gw, &gb);
    if (!std::isfinite(loss)) throw TrainingError("initial loss is not finite");
    if (trace) trace->push_back(loss);
    Matrix vw = Matrix::Zero(w.rows(), w.cols());
    Eigen::RowVectorXd vb = Eigen::RowVectorXd::Zero(b.size());
    double lr = s.lr;
    for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
        bool accepted = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            const Matrix nvw = s.momentum * vw - lr * gw;
            const Eigen::RowVectorXd nvb = s.momentum * vb - lr * gb;
            const Matrix wt = w + nvw;
            const Eigen::RowVectorXd bt = b + nvb;
            const double trial = objective(wt, bt, nullptr, nullptr);
            if (std::isnan(trial)) throw TrainingError("loss became NaN at epoch " + std::to_string(epoch));
            if (trial <= loss) {
                w = wt;
                b = bt;
                vw = nvw;
                vb = nvb;
                loss = objective(w, b, &gw, &gb);
                accepted = true;
            } else {
                lr *= 0.5;
                vw.setZero();
                vb.setZero();
            }
        }
        if (trace) trace->push_back(loss);
        if (!accepted) break;  // no descent step found: converged to round-off
    }
}

inline int argmax(std::span<const double> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace emap::models
