#pragma once

// Weighted binary CART classifier (Gini impurity) over a contiguous range of
// feature columns. Splits are x[f] <= threshold with the threshold at the
// midpoint between adjacent distinct values. Ties between equally good
// splits go to the lowest feature index, then the lowest threshold. A node
// that is impure is split even when no split lowers the impurity, so trees
// deep enough for the data reach zero training error.

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "emap/numeric.hpp"

namespace emap::models {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    template <class Row>
    int predict(const Row& x) const {
        int k = 0;
        while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(k)];
            k = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(k)].label;
    }

    std::size_t depth() const {
        std::vector<std::size_t> d(nodes.size(), 0);
        std::size_t best = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            best = std::max(best, d[k]);
            if (nodes[k].feature >= 0) {
                d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
                d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
            }
        }
        return best;
    }
};

/// Column-presorted view of a feature matrix, built once and shared by every
/// tree fitted on it.
struct PresortedFeatures {
    const Matrix* x = nullptr;
    std::vector<std::vector<std::uint32_t>> order;  // per feature, rows by ascending value

    explicit PresortedFeatures(const Matrix& features) : x(&features) {
        const auto n = static_cast<std::uint32_t>(features.rows());
        order.resize(static_cast<std::size_t>(features.cols()));
        for (Eigen::Index f = 0; f < features.cols(); ++f) {
            auto& o = order[static_cast<std::size_t>(f)];
            o.resize(n);
            std::iota(o.begin(), o.end(), 0u);
            std::stable_sort(o.begin(), o.end(),
                             [&](std::uint32_t a, std::uint32_t b) { return features(a, f) < features(b, f); });
        }
    }
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const PresortedFeatures& data, std::span<const int> labels, std::span<const double> weights,
                int feature_begin, int feature_end, std::size_t max_depth)
        : data_(data), labels_(labels), weights_(weights), fb_(feature_begin), fe_(feature_end), max_depth_(max_depth),
          goes_left_(labels.size(), 0) {}

    DecisionTree build() {
        std::vector<std::vector<std::uint32_t>> sorted;
        for (int f = fb_; f < fe_; ++f) sorted.push_back(data_.order[static_cast<std::size_t>(f)]);
        tree_.nodes.clear();
        grow(std::move(sorted), 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::vector<std::uint32_t>> sorted, std::size_t depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const auto& rows = sorted.front();
        double w0 = 0.0, w1 = 0.0;
        for (auto r : rows) (labels_[r] ? w1 : w0) += weights_[r];
        tree_.nodes[static_cast<std::size_t>(id)].label = w1 > w0 ? 1 : 0;
        if (depth >= max_depth_ || w0 <= 0.0 || w1 <= 0.0 || rows.size() < 2) return id;

        const Matrix& x = *data_.x;
        double best_score = std::numeric_limits<double>::infinity();
        int best_f = -1;
        double best_thr = 0.0;
        for (std::size_t fi = 0; fi < sorted.size(); ++fi) {
            const auto& o = sorted[fi];
            const int f = fb_ + static_cast<int>(fi);
            double l0 = 0.0, l1 = 0.0;
            for (std::size_t k = 0; k + 1 < o.size(); ++k) {
                (labels_[o[k]] ? l1 : l0) += weights_[o[k]];
                const double xa = x(o[k], f), xb = x(o[k + 1], f);
                if (!(xa < xb)) continue;
                const double wl = l0 + l1, wr = (w0 - l0) + (w1 - l1);
                if (wl <= 0.0 || wr <= 0.0) continue;
                const double r0 = w0 - l0, r1 = w1 - l1;
                const double score = (wl - (l0 * l0 + l1 * l1) / wl) + (wr - (r0 * r0 + r1 * r1) / wr);
                if (score < best_score) {
                    best_score = score;
                    best_f = f;
                    best_thr = 0.5 * (xa + xb);
                }
            }
        }
        if (best_f < 0) return id;

        for (auto r : rows) goes_left_[r] = x(r, best_f) <= best_thr ? 1 : 0;
        std::vector<std::vector<std::uint32_t>> left(sorted.size()), right(sorted.size());
        for (std::size_t fi = 0; fi < sorted.size(); ++fi) {
            for (auto r : sorted[fi]) (goes_left_[r] ? left[fi] : right[fi]).push_back(r);
        }
        sorted.clear();
        sorted.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best_f;
        node.threshold = best_thr;
        node.left = l;
        node.right = r;
        return id;
    }

    const PresortedFeatures& data_;
    std::span<const int> labels_;
    std::span<const double> weights_;
    int fb_, fe_;
    std::size_t max_depth_;
    std::vector<std::uint8_t> goes_left_;
    DecisionTree tree_;
};

}  // namespace detail

/// Fits a tree on feature columns [feature_begin, feature_end) of `data`.
inline DecisionTree fit_tree(const PresortedFeatures& data, std::span<const int> labels,
                             std::span<const double> weights, int feature_begin, int feature_end,
                             std::size_t max_depth) {
    return detail::TreeBuilder(data, labels, weights, feature_begin, feature_end, max_depth).build();
}

}  // namespace emap::models
