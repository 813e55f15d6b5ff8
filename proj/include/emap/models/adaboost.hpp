#pragma once

// Binary discrete AdaBoost over depth-capped CART trees. The unimodal variant
// fits one tree on text features and one on visual features each round and
// keeps the one with lower weighted error, so the ensemble stays additive
// across modalities.

#include <cmath>
#include <string>

#include "emap/models/common.hpp"
#include "emap/models/tree.hpp"

namespace emap::models {

enum class BoostRestriction { full, unimodal };
enum class Modality { both, text, visual };

inline const char* restriction_name(BoostRestriction r) { return r == BoostRestriction::full ? "full" : "unimodal"; }
inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::both: return "both";
        case Modality::text: return "text";
        case Modality::visual: return "visual";
    }
    return "?";
}

struct AdaBoostConfig {
    std::size_t stages = 200;
    std::size_t max_depth = 15;
    BoostRestriction restriction = BoostRestriction::full;
    std::uint64_t seed = 0;  // recorded for provenance; fitting is deterministic
};

struct BoostStage {
    DecisionTree tree;
    double alpha = 0.0;
    Modality modality = Modality::both;
};

struct AdaBoostModel {
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    std::vector<BoostStage> stages;
    AdaBoostConfig config;
    std::string stop_reason;

    std::size_t num_classes() const { return 2; }

    /// Per-class staged sums: score[c] = sum of alpha over stages voting c.
    template <class Row>
    std::array<double, 2> scores(const Row& x) const {
        std::array<double, 2> s{0.0, 0.0};
        for (const auto& st : stages) s[static_cast<std::size_t>(st.tree.predict(x))] += st.alpha;
        return s;
    }

    std::vector<double> predict(std::span<const double> t, std::span<const double> v) const {
        std::vector<double> x(t.begin(), t.end());
        x.insert(x.end(), v.begin(), v.end());
        const auto s = scores(x);
        return {s[0], s[1]};
    }

    Matrix logits(const Matrix& t, const Matrix& v) const {
        Matrix out(t.rows(), 2);
        std::vector<double> x(d1 + d2);
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            std::copy(t.row(i).begin(), t.row(i).end(), x.begin());
            std::copy(v.row(i).begin(), v.row(i).end(), x.begin() + static_cast<std::ptrdiff_t>(d1));
            const auto s = scores(x);
            out(i, 0) = s[0];
            out(i, 1) = s[1];
        }
        return out;
    }

    void score_row(std::span<const double> t, const Matrix& visuals, std::span<double> out) const {
        std::vector<double> x(d1 + d2);
        std::copy(t.begin(), t.end(), x.begin());
        for (Eigen::Index j = 0; j < visuals.rows(); ++j) {
            std::copy(visuals.row(j).begin(), visuals.row(j).end(), x.begin() + static_cast<std::ptrdiff_t>(d1));
            const auto s = scores(x);
            out[static_cast<std::size_t>(2 * j)] = s[0];
            out[static_cast<std::size_t>(2 * j + 1)] = s[1];
        }
    }

    void validate() const {
        for (const auto& st : stages) {
            if (!std::isfinite(st.alpha)) throw InputError("adaboost model: non-finite stage weight");
            for (const auto& n : st.tree.nodes) {
                if (n.feature >= static_cast<int>(d1 + d2)) throw InputError("adaboost model: feature out of range");
                if (n.feature >= 0 && (n.left < 0 || n.right < 0 ||
                                       static_cast<std::size_t>(std::max(n.left, n.right)) >= st.tree.nodes.size()))
                    throw InputError("adaboost model: bad child index");
            }
            if (st.tree.nodes.empty()) throw InputError("adaboost model: empty tree");
        }
    }
};

/// Mutable boosting state over a fixed training set.
struct BoostState {
    Matrix features;  // rows = items, columns = [t | v]
    std::vector<int> labels;
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    std::vector<double> weights;
    std::vector<double> margin;  // running sum of alpha * (+1 / -1) per item
    AdaBoostModel model;
    bool done = false;
    PresortedFeatures presorted;

    BoostState(Matrix x, std::vector<int> y, std::size_t text_dim, std::size_t visual_dim, const AdaBoostConfig& cfg)
        : features(std::move(x)), labels(std::move(y)), d1(text_dim), d2(visual_dim),
          weights(labels.size(), 1.0 / static_cast<double>(labels.size())), margin(labels.size(), 0.0),
          presorted(features) {
        model.d1 = d1;
        model.d2 = d2;
        model.config = cfg;
    }
    BoostState(const BoostState&) = delete;
    BoostState& operator=(const BoostState&) = delete;

    std::size_t train_errors() const {
        std::size_t wrong = 0;
        for (std::size_t k = 0; k < labels.size(); ++k) wrong += ((margin[k] > 0.0 ? 1 : 0) != labels[k]);
        return wrong;
    }
};

namespace detail {

inline double weighted_error(const BoostState& s, const DecisionTree& tree, std::vector<int>& pred) {
    double err = 0.0;
    for (Eigen::Index i = 0; i < s.features.rows(); ++i) {
        pred[static_cast<std::size_t>(i)] = tree.predict(s.features.row(i));
        if (pred[static_cast<std::size_t>(i)] != s.labels[static_cast<std::size_t>(i)])
            err += s.weights[static_cast<std::size_t>(i)];
    }
    return err;
}

inline constexpr double kChanceSlack = 1e-12;
inline constexpr double kMinError = 1e-10;

}  // namespace detail

/// One boosting round. Full: a tree on all features. Unimodal: a text-only
/// and a visual-only tree, keeping the lower weighted error (text on ties).
/// Stops (sets done) when no candidate beats chance or the ensemble reaches
/// zero training error.
inline void boost_round(BoostState& s) {
    if (s.done) return;
    const auto& cfg = s.model.config;
    const int dt = static_cast<int>(s.d1), dall = static_cast<int>(s.d1 + s.d2);

    struct Candidate {
        DecisionTree tree;
        Modality modality;
        double error;
        std::vector<int> pred;
    };
    std::vector<Candidate> cands;
    auto consider = [&](int fb, int fe, Modality m) {
        if (fe <= fb) return;
        Candidate c{fit_tree(s.presorted, s.labels, s.weights, fb, fe, cfg.max_depth), m, 0.0,
                    std::vector<int>(s.labels.size())};
        c.error = detail::weighted_error(s, c.tree, c.pred);
        cands.push_back(std::move(c));
    };
    if (cfg.restriction == BoostRestriction::full) {
        consider(0, dall, Modality::both);
    } else {
        consider(0, dt, Modality::text);
        consider(dt, dall, Modality::visual);
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < cands.size(); ++k)
        if (cands[k].error < cands[best].error) best = k;
    Candidate& c = cands[best];

    if (c.error >= 0.5 - detail::kChanceSlack) {
        s.done = true;
        s.model.stop_reason = "no weak learner beats chance";
        return;
    }
    const double eps = std::max(c.error, detail::kMinError);
    const double alpha = 0.5 * std::log((1.0 - eps) / eps);
    double total = 0.0;
    for (std::size_t k = 0; k < s.labels.size(); ++k) {
        const double agree = c.pred[k] == s.labels[k] ? 1.0 : -1.0;
        s.weights[k] *= std::exp(-alpha * agree);
        s.margin[k] += alpha * (c.pred[k] == 1 ? 1.0 : -1.0);
        total += s.weights[k];
    }
    for (auto& w : s.weights) w /= total;
    s.model.stages.push_back({std::move(c.tree), alpha, c.modality});

    if (s.train_errors() == 0) {
        s.done = true;
        s.model.stop_reason = "training error reached zero";
    } else if (s.model.stages.size() >= cfg.stages) {
        s.done = true;
        s.model.stop_reason = "stage budget exhausted";
    }
}

/// Trains on the train split. Requires two classes with both present.
inline AdaBoostModel train_adaboost(const PairedDataset& data, const AdaBoostConfig& cfg) {
    const auto idx = require_train_split(data);
    if (data.num_classes != 2) throw InputError("adaboost supports binary labels only");
    const PairedDataset train = data.subset(idx);
    bool has0 = false, has1 = false;
    for (int y : train.labels) (y ? has1 : has0) = true;
    if (!(has0 && has1)) throw InputError("adaboost: training labels are constant");
    if (cfg.stages == 0 || cfg.max_depth == 0) throw InputError("adaboost: stages and max_depth must be >= 1");

    Matrix x(train.t.rows(), train.t.cols() + train.v.cols());
    x << train.t, train.v;
    BoostState state(std::move(x), train.labels, train.d1(), train.d2(), cfg);
    while (!state.done) boost_round(state);
    return std::move(state.model);
}

}  // namespace emap::models
