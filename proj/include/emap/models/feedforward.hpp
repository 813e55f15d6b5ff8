#pragma once

// Feed-forward network over a fused cross-modal feature. Text and visual
// features are projected affinely to a common width h (t', v'); the network
// then sees [t'; v'; v' - t'; v' * t'] followed by dense layers.

#include <string>

#include "emap/models/common.hpp"
#include "emap/rng.hpp"

namespace emap::models {

enum class Activation { relu, tanh };

inline const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw InputError("unknown activation: " + s);
}

struct FeedForwardConfig {
    std::size_t width = 128;  // projection width h
    std::vector<std::size_t> hidden = {128, 128};
    Activation activation = Activation::relu;
    double lr = 1e-2;
    double momentum = 0.9;
    std::size_t epochs = 500;
    std::size_t plateau_patience = 20;  // epochs without improvement before halving lr
    double l2 = 0.0;
    std::uint64_t seed = 0;
};

struct DenseLayer {
    Matrix w;  // in x out
    Eigen::RowVectorXd b;
};

struct FeedForwardModel {
    DenseLayer proj_t;  // d1 x h
    DenseLayer proj_v;  // d2 x h
    std::vector<DenseLayer> hidden;
    DenseLayer output;
    FeedForwardConfig config;

    std::size_t d1() const { return static_cast<std::size_t>(proj_t.w.rows()); }
    std::size_t d2() const { return static_cast<std::size_t>(proj_v.w.rows()); }
    std::size_t num_classes() const { return static_cast<std::size_t>(output.b.size()); }

    Matrix project_text(const Matrix& t) const { return (t * proj_t.w).rowwise() + proj_t.b; }
    Matrix project_visual(const Matrix& v) const { return (v * proj_v.w).rowwise() + proj_v.b; }

    static Matrix fuse(const Matrix& a, const Matrix& b) {
        const Eigen::Index h = a.cols();
        Matrix z(a.rows(), 4 * h);
        z.leftCols(h) = a;
        z.middleCols(h, h) = b;
        z.middleCols(2 * h, h) = b - a;
        z.rightCols(h) = (b.array() * a.array()).matrix();
        return z;
    }

    void activate(Matrix& x) const {
        if (config.activation == Activation::relu)
            x = x.cwiseMax(0.0);
        else
            x = x.array().tanh().matrix();
    }

    /// Logits from already projected rows (a = t', b = v').
    Matrix head(const Matrix& a, const Matrix& b) const {
        Matrix x = fuse(a, b);
        for (const auto& layer : hidden) {
            x = (x * layer.w).rowwise() + layer.b;
            activate(x);
        }
        return (x * output.w).rowwise() + output.b;
    }

    Matrix logits(const Matrix& t, const Matrix& v) const { return head(project_text(t), project_visual(v)); }

    /// Grid row from a projected text row and all projected visual rows.
    void score_projected_row(const Eigen::RowVectorXd& a, const Matrix& projected_visuals, std::span<double> out) const {
        const Matrix rep = a.replicate(projected_visuals.rows(), 1);
        Eigen::Map<Matrix> dst(out.data(), projected_visuals.rows(), output.b.size());
        dst = head(rep, projected_visuals);
    }

    std::vector<double> predict(std::span<const double> t, std::span<const double> v) const {
        const Matrix out = logits(Matrix(as_row(t)), Matrix(as_row(v)));
        return {out.data(), out.data() + out.size()};
    }

    void validate() const {
        const Eigen::Index h = proj_t.w.cols();
        if (proj_v.w.cols() != h || proj_t.b.size() != h || proj_v.b.size() != h)
            throw InputError("feedforward model: projection widths differ");
        Eigen::Index in = 4 * h;
        for (const auto& l : hidden) {
            if (l.w.rows() != in || l.b.size() != l.w.cols()) throw InputError("feedforward model: layer shape mismatch");
            in = l.w.cols();
        }
        if (output.w.rows() != in || output.b.size() != output.w.cols())
            throw InputError("feedforward model: output layer shape mismatch");
        auto finite = [](const DenseLayer& l) { return l.w.allFinite() && l.b.allFinite(); };
        bool ok = finite(proj_t) && finite(proj_v) && finite(output);
        for (const auto& l : hidden) ok = ok && finite(l);
        if (!ok) throw InputError("feedforward model: non-finite parameters");
    }
};

namespace detail {

inline DenseLayer init_layer(Eigen::Index in, Eigen::Index out, double gain, Rng& rng) {
    DenseLayer l{Matrix(in, out), Eigen::RowVectorXd::Zero(out)};
    const double sd = std::sqrt(gain / static_cast<double>(in));
    for (auto& e : l.w.reshaped<Eigen::RowMajor>()) e = sd * rng.normal();
    return l;
}

/// Parameter-shaped accumulator used for gradients and momentum.
struct FeedForwardGrad {
    std::vector<DenseLayer> layers;  // proj_t, proj_v, hidden..., output

    static FeedForwardGrad zeros_like(const std::vector<DenseLayer*>& params) {
        FeedForwardGrad g;
        for (const auto* p : params)
            g.layers.push_back({Matrix::Zero(p->w.rows(), p->w.cols()), Eigen::RowVectorXd::Zero(p->b.size())});
        return g;
    }
};

inline std::vector<DenseLayer*> parameters(FeedForwardModel& m) {
    std::vector<DenseLayer*> out = {&m.proj_t, &m.proj_v};
    for (auto& l : m.hidden) out.push_back(&l);
    out.push_back(&m.output);
    return out;
}

/// Mean cross-entropy (+ l2) and its gradient for standardized inputs.
inline double feedforward_loss(const FeedForwardModel& m, const Matrix& t, const Matrix& v,
                               const std::vector<int>& labels, FeedForwardGrad* grad) {
    const Matrix a = m.project_text(t);
    const Matrix b = m.project_visual(v);
    std::vector<Matrix> acts;  // inputs to each hidden layer and to the output layer
    acts.push_back(FeedForwardModel::fuse(a, b));
    for (const auto& layer : m.hidden) {
        Matrix x = (acts.back() * layer.w).rowwise() + layer.b;
        m.activate(x);
        acts.push_back(std::move(x));
    }
    const Matrix logits = (acts.back() * m.output.w).rowwise() + m.output.b;
    Matrix delta;
    double loss = softmax_cross_entropy(logits, labels, delta);
    if (m.config.l2 > 0) {
        double sq = m.output.w.squaredNorm() + m.proj_t.w.squaredNorm() + m.proj_v.w.squaredNorm();
        for (const auto& l : m.hidden) sq += l.w.squaredNorm();
        loss += 0.5 * m.config.l2 * sq;
    }
    if (!grad) return loss;

    auto& gl = grad->layers;
    const std::size_t nh = m.hidden.size();
    gl[2 + nh].w = acts.back().transpose() * delta;
    gl[2 + nh].b = delta.colwise().sum();
    Matrix back = delta * m.output.w.transpose();
    for (std::size_t k = nh; k-- > 0;) {
        const Matrix& out = acts[k + 1];
        if (m.config.activation == Activation::relu)
            back = (back.array() * (out.array() > 0.0).cast<double>()).matrix();
        else
            back = (back.array() * (1.0 - out.array().square())).matrix();
        gl[2 + k].w = acts[k].transpose() * back;
        gl[2 + k].b = back.colwise().sum();
        back = back * m.hidden[k].w.transpose();
    }
    const Eigen::Index h = a.cols();
    const auto dz_a = back.leftCols(h);
    const auto dz_b = back.middleCols(h, h);
    const auto dz_d = back.middleCols(2 * h, h);
    const auto dz_m = back.rightCols(h);
    const Matrix da = dz_a - dz_d + (dz_m.array() * b.array()).matrix();
    const Matrix db = dz_b + dz_d + (dz_m.array() * a.array()).matrix();
    gl[0].w = t.transpose() * da;
    gl[0].b = da.colwise().sum();
    gl[1].w = v.transpose() * db;
    gl[1].b = db.colwise().sum();
    if (m.config.l2 > 0) {
        gl[0].w += m.config.l2 * m.proj_t.w;
        gl[1].w += m.config.l2 * m.proj_v.w;
        for (std::size_t k = 0; k < nh; ++k) gl[2 + k].w += m.config.l2 * m.hidden[k].w;
        gl[2 + nh].w += m.config.l2 * m.output.w;
    }
    return loss;
}

}  // namespace detail

/// Full-batch gradient descent with momentum; the learning rate halves when
/// the loss has not improved for `plateau_patience` epochs.
inline FeedForwardModel train_feedforward(const PairedDataset& data, const FeedForwardConfig& cfg,
                                          std::vector<double>* loss_trace = nullptr) {
    const auto idx = require_train_split(data);
    const PairedDataset train = data.subset(idx);
    if (cfg.width == 0) throw InputError("feedforward: width must be >= 1");
    for (auto w : cfg.hidden)
        if (w == 0) throw InputError("feedforward: hidden widths must be >= 1");
    const Standardizer st = Standardizer::fit(train.t);
    const Standardizer sv = Standardizer::fit(train.v);
    const Matrix zt = st.apply(train.t);
    const Matrix zv = sv.apply(train.v);

    const auto h = static_cast<Eigen::Index>(cfg.width);
    const double gain = cfg.activation == Activation::relu ? 2.0 : 1.0;
    Rng rng(stream_seed(cfg.seed, streams::kInit));
    FeedForwardModel m;
    m.config = cfg;
    m.proj_t = detail::init_layer(zt.cols(), h, 1.0, rng);
    m.proj_v = detail::init_layer(zv.cols(), h, 1.0, rng);
    Eigen::Index in = 4 * h;
    for (auto w : cfg.hidden) {
        m.hidden.push_back(detail::init_layer(in, static_cast<Eigen::Index>(w), gain, rng));
        in = static_cast<Eigen::Index>(w);
    }
    m.output = detail::init_layer(in, static_cast<Eigen::Index>(data.num_classes), 1.0, rng);

    auto params = detail::parameters(m);
    auto grad = detail::FeedForwardGrad::zeros_like(params);
    auto velocity = detail::FeedForwardGrad::zeros_like(params);
    double lr = cfg.lr;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = detail::feedforward_loss(m, zt, zv, train.labels, &grad);
        if (!std::isfinite(loss)) throw TrainingError("feedforward loss diverged at epoch " + std::to_string(epoch));
        if (loss_trace) loss_trace->push_back(loss);
        if (loss < best - 1e-6 * std::abs(best)) {
            best = loss;
            since_best = 0;
        } else if (++since_best >= cfg.plateau_patience) {
            lr *= 0.5;
            since_best = 0;
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            velocity.layers[k].w = cfg.momentum * velocity.layers[k].w - lr * grad.layers[k].w;
            velocity.layers[k].b = cfg.momentum * velocity.layers[k].b - lr * grad.layers[k].b;
            params[k]->w += velocity.layers[k].w;
            params[k]->b += velocity.layers[k].b;
        }
    }

    // Fold z-scoring into the projections: z = (x - mean) / scale.
    auto fold = [](DenseLayer& l, const Standardizer& s) {
        l.w = (l.w.array().colwise() / s.scale.transpose().array()).matrix();
        l.b -= s.mean * l.w;
    };
    fold(m.proj_t, st);
    fold(m.proj_v, sv);
    m.validate();
    return m;
}

}  // namespace emap::models
