#pragma once

// Logistic regression over an explicit degree-2 cross-modal feature map
// [t; v; t_a * v_b]. Per class c:
//   logit_c = b_c + w_t[:, c] . t + w_v[:, c] . v + t^T M_c v

#include "emap/models/common.hpp"
#include "emap/rng.hpp"

namespace emap::models {

struct Poly2Config {
    double l2 = 1e-4;
    double lr = 1.0;
    double momentum = 0.9;
    std::size_t epochs = 300;
    std::uint64_t seed = 0;
    std::size_t memory_budget_bytes = std::size_t{2} << 30;  // expanded design matrix cap
};

struct Poly2Model {
    Matrix w_t;    // d1 x C
    Matrix w_v;    // d2 x C
    Matrix cross;  // C x (d1 * d2); row c is M_c flattened row-major
    Eigen::RowVectorXd b;
    Poly2Config config;

    std::size_t d1() const { return static_cast<std::size_t>(w_t.rows()); }
    std::size_t d2() const { return static_cast<std::size_t>(w_v.rows()); }
    std::size_t num_classes() const { return static_cast<std::size_t>(b.size()); }

    Eigen::Map<const Matrix> cross_matrix(Eigen::Index c) const {
        return {cross.row(c).data(), w_t.rows(), w_v.rows()};
    }

    Matrix logits(const Matrix& t, const Matrix& v) const {
        Matrix out = (t * w_t + v * w_v).rowwise() + b;
        for (Eigen::Index c = 0; c < b.size(); ++c)
            out.col(c) += ((t * cross_matrix(c)).array() * v.array()).rowwise().sum().matrix();
        return out;
    }

    void score_row(std::span<const double> t, const Matrix& visuals, std::span<double> out) const {
        // Fold t into per-class visual weights: u_c = w_v[:, c] + M_c^T t.
        Matrix u = w_v;
        for (Eigen::Index c = 0; c < b.size(); ++c) u.col(c) += (as_row(t) * cross_matrix(c)).transpose();
        const Eigen::RowVectorXd text_part = as_row(t) * w_t + b;
        Eigen::Map<Matrix> dst(out.data(), visuals.rows(), b.size());
        dst = (visuals * u).rowwise() + text_part;
    }

    std::vector<double> predict(std::span<const double> t, std::span<const double> v) const {
        Eigen::RowVectorXd out = as_row(t) * w_t + as_row(v) * w_v + b;
        for (Eigen::Index c = 0; c < b.size(); ++c) out(c) += (as_row(t) * cross_matrix(c)).dot(as_row(v));
        return {out.begin(), out.end()};
    }

    void validate() const {
        if (w_t.cols() != b.size() || w_v.cols() != b.size() || cross.rows() != b.size() ||
            cross.cols() != w_t.rows() * w_v.rows())
            throw InputError("poly2 model: inconsistent parameter shapes");
        if (!w_t.allFinite() || !w_v.allFinite() || !cross.allFinite() || !b.allFinite())
            throw InputError("poly2 model: non-finite weights");
    }
};

inline Poly2Model train_poly2(const PairedDataset& data, const Poly2Config& cfg,
                              std::vector<double>* loss_trace = nullptr) {
    const auto idx = require_train_split(data);
    const PairedDataset train = data.subset(idx);
    const Eigen::Index n = train.t.rows(), d1 = train.t.cols(), d2 = train.v.cols();
    const auto classes = static_cast<Eigen::Index>(data.num_classes);
    const Eigen::Index features = d1 + d2 + d1 * d2;
    const double bytes = static_cast<double>(n) * static_cast<double>(features) * 8.0;
    if (bytes > static_cast<double>(cfg.memory_budget_bytes))
        throw CapabilityError("poly2: expanded design matrix (" + std::to_string(features) +
                         " features) exceeds the configured memory budget");

    const Standardizer st = Standardizer::fit(train.t);
    const Standardizer sv = Standardizer::fit(train.v);
    const Matrix zt = st.apply(train.t);
    const Matrix zv = sv.apply(train.v);
    Matrix x(n, features);
    x.leftCols(d1) = zt;
    x.middleCols(d1, d2) = zv;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < d1; ++a)
            x.row(i).segment(d1 + d2 + a * d2, d2) = zt(i, a) * zv.row(i);

    Rng rng(stream_seed(cfg.seed, streams::kInit));
    Matrix w(features, classes);
    for (auto& e : w.reshaped<Eigen::RowMajor>()) e = 0.01 * rng.normal();
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(classes);
    fit_softmax_regression(x, train.labels, w, b, {cfg.lr, cfg.momentum, cfg.l2, cfg.epochs}, loss_trace);

    // Undo the z-scoring: with A, B, M the standardized-space weights,
    // M' = M / (s_t s_v^T), w_t = A / s_t - M' m_v, w_v = B / s_v - M'^T m_t,
    // b' = b - m_t . (A / s_t) - m_v . (B / s_v) + m_t^T M' m_v.
    Poly2Model m;
    m.config = cfg;
    m.w_t.resize(d1, classes);
    m.w_v.resize(d2, classes);
    m.cross.resize(classes, d1 * d2);
    m.b = b;
    for (Eigen::Index c = 0; c < classes; ++c) {
        Matrix mc(d1, d2);
        for (Eigen::Index a = 0; a < d1; ++a)
            for (Eigen::Index k = 0; k < d2; ++k) mc(a, k) = w(d1 + d2 + a * d2 + k, c) / (st.scale(a) * sv.scale(k));
        const Vector a_raw = w.col(c).head(d1).array() / st.scale.transpose().array();
        const Vector b_raw = w.col(c).segment(d1, d2).array() / sv.scale.transpose().array();
        m.w_t.col(c) = a_raw - mc * sv.mean.transpose();
        m.w_v.col(c) = b_raw - mc.transpose() * st.mean.transpose();
        m.b(c) = b(c) - st.mean.dot(a_raw) - sv.mean.dot(b_raw) + (st.mean * mc).dot(sv.mean);
        m.cross.row(c) = mc.reshaped<Eigen::RowMajor>().transpose();
    }
    return m;
}

}  // namespace emap::models
