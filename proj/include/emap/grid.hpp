#pragma once

// Cross-pairing score grids and their empirical multimodally-additive
// projection (EMAP).

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emap/error.hpp"
#include "emap/numeric.hpp"

namespace emap {

/// Model scores over every text x visual pairing. Entry (i, j, c) is the
/// score of channel c for text i paired with visual j, stored row-major.
struct ScoreGrid {
    std::size_t n_text = 0;
    std::size_t n_visual = 0;
    std::size_t d = 0;
    std::vector<double> values;
    std::vector<std::string> text_ids;
    std::vector<std::string> visual_ids;

    ScoreGrid() = default;
    ScoreGrid(std::size_t nt, std::size_t nv, std::size_t dims)
        : n_text(nt), n_visual(nv), d(dims), values(nt * nv * dims, 0.0) {}

    bool square() const noexcept { return n_text == n_visual; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t c) const noexcept {
        return (i * n_visual + j) * d + c;
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t c) { return values[index(i, j, c)]; }
    double operator()(std::size_t i, std::size_t j, std::size_t c) const { return values[index(i, j, c)]; }

    std::span<double> cell(std::size_t i, std::size_t j) { return {values.data() + index(i, j, 0), d}; }
    std::span<const double> cell(std::size_t i, std::size_t j) const {
        return {values.data() + index(i, j, 0), d};
    }

    /// Throws InputError on shape problems and NumericError on non-finite entries.
    void validate() const {
        if (n_text == 0 || n_visual == 0 || d == 0) throw InputError("score grid must have n >= 1 and d >= 1");
        if (values.size() != n_text * n_visual * d)
            throw InputError("score grid holds " + std::to_string(values.size()) + " values, expected " +
                             std::to_string(n_text * n_visual * d));
        if (!text_ids.empty() && text_ids.size() != n_text) throw InputError("text_ids length differs from n");
        if (!visual_ids.empty() && visual_ids.size() != n_visual)
            throw InputError("visual_ids length differs from n");
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!std::isfinite(values[k])) {
                const std::size_t c = k % d;
                const std::size_t j = (k / d) % n_visual;
                const std::size_t i = k / (d * n_visual);
                throw NumericError("non-finite grid value at (" + std::to_string(i) + ", " + std::to_string(j) +
                                   ", " + std::to_string(c) + ")");
            }
        }
    }
};

/// Per-text offsets tau, per-visual offsets phi and grand mean mu. In the
/// canonical gauge every channel of tau and of phi has zero mean.
struct AdditiveDecomposition {
    Matrix tau;  // n_text x d
    Matrix phi;  // n_visual x d
    Vector mu;   // d

    std::size_t n_text() const { return static_cast<std::size_t>(tau.rows()); }
    std::size_t n_visual() const { return static_cast<std::size_t>(phi.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(mu.size()); }

    double value(std::size_t i, std::size_t j, std::size_t c) const {
        return tau(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) +
               phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) + mu(static_cast<Eigen::Index>(c));
    }

    void validate() const {
        if (tau.cols() != mu.size() || phi.cols() != mu.size())
            throw InputError("decomposition channel counts disagree");
        if (tau.rows() == 0 || phi.rows() == 0 || mu.size() == 0) throw InputError("empty decomposition");
        if (!tau.allFinite() || !phi.allFinite() || !mu.allFinite())
            throw NumericError("decomposition has non-finite entries");
    }
};

/// Pure callable (text features, visual features) -> logits.
template <class F>
concept Scorer = requires(const F& f, std::span<const double> t, std::span<const double> v) {
    { f(t, v) } -> std::convertible_to<std::vector<double>>;
};

/// Fills a grid row by row with fill_row(i, out) where `out` spans the
/// n_visual * d values of row i. Rows are independent, so any worker count
/// produces the same bytes. Non-finite output is reported with its cell.
template <class FillRow>
ScoreGrid build_grid_rows(std::size_t n_text, std::size_t n_visual, std::size_t d, FillRow&& fill_row,
                          unsigned threads = 1) {
    if (n_text == 0 || n_visual == 0) throw InputError("cannot build a grid with no items");
    if (d == 0) throw InputError("scorer output dimension must be >= 1");
    ScoreGrid grid(n_text, n_visual, d);
    parallel_for(n_text, threads, [&](std::size_t i) {
        std::span<double> row(grid.values.data() + i * n_visual * d, n_visual * d);
        fill_row(i, row);
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (!std::isfinite(row[k]))
                throw NumericError("scorer returned a non-finite value for pair (" + std::to_string(i) + ", " +
                                   std::to_string(k / d) + ")");
        }
    });
    return grid;
}

/// Evaluates the scorer on all N^2 text/visual pairings.
template <Scorer F>
ScoreGrid build_grid(const F& scorer, const std::vector<std::vector<double>>& texts,
                     const std::vector<std::vector<double>>& visuals, unsigned threads = 1) {
    if (texts.size() != visuals.size())
        throw InputError("texts and visuals differ in length (" + std::to_string(texts.size()) + " vs " +
                         std::to_string(visuals.size()) + ")");
    if (texts.empty()) throw InputError("cannot build a grid with no items");
    for (const auto& t : texts)
        if (t.size() != texts.front().size()) throw InputError("text feature vectors differ in dimension");
    for (const auto& v : visuals)
        if (v.size() != visuals.front().size()) throw InputError("visual feature vectors differ in dimension");

    const std::size_t n = texts.size();
    const std::size_t d = std::vector<double>(scorer(texts[0], visuals[0])).size();
    return build_grid_rows(
        n, n, d,
        [&](std::size_t i, std::span<double> row) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::vector<double> out = scorer(texts[i], visuals[j]);
                if (out.size() != d)
                    throw InputError("scorer output length changed at pair (" + std::to_string(i) + ", " +
                                     std::to_string(j) + ")");
                std::copy(out.begin(), out.end(), row.begin() + static_cast<std::ptrdiff_t>(j * d));
            }
        },
        threads);
}

/// Moves the mean of every tau and phi channel into mu. Summed values
/// tau[i] + phi[j] + mu are unchanged up to round-off.
inline AdditiveDecomposition canonicalize(AdditiveDecomposition dec) {
    const auto nt = static_cast<std::size_t>(dec.tau.rows());
    const auto nv = static_cast<std::size_t>(dec.phi.rows());
    for (Eigen::Index c = 0; c < dec.mu.size(); ++c) {
        const double tm = pairwise_mean([&](std::size_t i) { return dec.tau(static_cast<Eigen::Index>(i), c); }, nt);
        const double pm = pairwise_mean([&](std::size_t j) { return dec.phi(static_cast<Eigen::Index>(j), c); }, nv);
        dec.tau.col(c).array() -= tm;
        dec.phi.col(c).array() -= pm;
        dec.mu(c) += tm + pm;
    }
    return dec;
}

/// Empirical projection onto additive functions: tau = row means - mu,
/// phi = column means - mu, mu = grand mean (per channel).
inline AdditiveDecomposition emap_decompose(const ScoreGrid& grid) {
    grid.validate();
    const std::size_t nt = grid.n_text, nv = grid.n_visual, d = grid.d;
    AdditiveDecomposition dec{Matrix(nt, d), Matrix(nv, d), Vector(d)};
    std::vector<double> row_mean(nt), col_mean(nv);
    for (std::size_t c = 0; c < d; ++c) {
        const double mu = pairwise_mean([&](std::size_t k) { return grid.values[k * d + c]; }, nt * nv);
        for (std::size_t i = 0; i < nt; ++i)
            row_mean[i] = pairwise_mean([&](std::size_t j) { return grid(i, j, c); }, nv);
        for (std::size_t j = 0; j < nv; ++j)
            col_mean[j] = pairwise_mean([&](std::size_t i) { return grid(i, j, c); }, nt);
        const auto ci = static_cast<Eigen::Index>(c);
        for (std::size_t i = 0; i < nt; ++i) dec.tau(static_cast<Eigen::Index>(i), ci) = row_mean[i] - mu;
        for (std::size_t j = 0; j < nv; ++j) dec.phi(static_cast<Eigen::Index>(j), ci) = col_mean[j] - mu;
        dec.mu(ci) = mu;
    }
    return dec;
}

/// Projected predictions on the originally paired items (the diagonal).
inline Matrix emap_predictions(const AdditiveDecomposition& dec) {
    dec.validate();
    if (dec.tau.rows() != dec.phi.rows())
        throw InputError("emap_predictions needs a square decomposition (paired items)");
    Matrix preds(dec.tau.rows(), dec.mu.size());
    for (Eigen::Index i = 0; i < dec.tau.rows(); ++i)
        for (Eigen::Index c = 0; c < dec.mu.size(); ++c) preds(i, c) = dec.tau(i, c) + dec.phi(i, c) + dec.mu(c);
    return preds;
}

/// Full additive grid tau[i] + phi[j] + mu.
inline ScoreGrid reconstruct(const AdditiveDecomposition& dec) {
    dec.validate();
    ScoreGrid g(dec.n_text(), dec.n_visual(), dec.d());
    for (std::size_t i = 0; i < g.n_text; ++i)
        for (std::size_t j = 0; j < g.n_visual; ++j)
            for (std::size_t c = 0; c < g.d; ++c) g(i, j, c) = dec.value(i, j, c);
    return g;
}

/// Diagonal of a square grid as an N x d matrix (the direct paired predictions).
inline Matrix grid_diagonal(const ScoreGrid& grid) {
    if (!grid.square()) throw InputError("diagonal requires a square grid");
    Matrix out(grid.n_text, grid.d);
    for (std::size_t i = 0; i < grid.n_text; ++i)
        for (std::size_t c = 0; c < grid.d; ++c)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = grid(i, i, c);
    return out;
}

/// Squared-error loss of each channel: sum_ij (f_ijc - tau_ic - phi_jc - mu_c)^2.
inline std::vector<double> channel_losses(const ScoreGrid& grid, const AdditiveDecomposition& dec) {
    dec.validate();
    if (dec.n_text() != grid.n_text || dec.n_visual() != grid.n_visual || dec.d() != grid.d)
        throw InputError("grid and decomposition shapes differ");
    std::vector<double> out(grid.d);
    const std::size_t cells = grid.n_text * grid.n_visual;
    for (std::size_t c = 0; c < grid.d; ++c) {
        out[c] = pairwise_sum(
            [&](std::size_t k) {
                const std::size_t i = k / grid.n_visual, j = k % grid.n_visual;
                const double r = grid(i, j, c) - dec.value(i, j, c);
                return r * r;
            },
            cells);
    }
    return out;
}

inline double projection_loss(const ScoreGrid& grid, const AdditiveDecomposition& dec) {
    const auto per_channel = channel_losses(grid, dec);
    return pairwise_sum(per_channel);
}

/// Largest |f_ijc - (tau_ic + phi_jc + mu_c)| over the grid.
inline double max_residual(const ScoreGrid& grid, const AdditiveDecomposition& dec) {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.n_text; ++i)
        for (std::size_t j = 0; j < grid.n_visual; ++j)
            for (std::size_t c = 0; c < grid.d; ++c)
                worst = std::max(worst, std::abs(grid(i, j, c) - dec.value(i, j, c)));
    return worst;
}

}  // namespace emap
