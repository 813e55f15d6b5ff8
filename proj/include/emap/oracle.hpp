#pragma once

// Independent checks that the EMAP decomposition is the least-squares optimal
// additive fit: a direct solve of the first-order (normal-equation) system,
// analytic and finite-difference gradients, and the Hessian structure.
//
// For a square n x n channel with L = 1/2 sum_ij (f_ij - tau_i - phi_j)^2
// the stationarity system is H [tau; phi] = [row sums; column sums] with
//
//     H = [ n I   1  ]     (1 = all-ones n x n block)
//         [  1   n I ]
//
// H is PSD with a one-dimensional nullspace spanned by r = (1..1, -1..-1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "emap/grid.hpp"
#include "emap/io.hpp"
#include "emap/rng.hpp"

namespace emap {

struct StationarityReport {
    double oracle_loss = 0.0;
    double alg_loss = 0.0;
    double max_pred_diff = 0.0;         // |alg sums - oracle sums|, max over cells
    double grad_inf_norm = 0.0;         // analytic gradient at the checked decomposition
    double fd_max_gap = 0.0;            // analytic vs central-difference derivative
    double hessian_min_quadform = 0.0;  // min z^T H z over sampled z
    double hessian_identity_rel_err = 0.0;
    double nullspace_residual = 0.0;    // ||H r||_inf
};

/// Dense stationarity matrix for an n x n grid.
inline Matrix stationarity_hessian(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    Matrix h = Matrix::Zero(2 * m, 2 * m);
    h.topLeftCorner(m, m).diagonal().setConstant(static_cast<double>(n));
    h.bottomRightCorner(m, m).diagonal().setConstant(static_cast<double>(n));
    h.topRightCorner(m, m).setOnes();
    h.bottomLeftCorner(m, m).setOnes();
    return h;
}

/// r = (1, ..., 1, -1, ..., -1), the gauge direction.
inline Vector gauge_direction(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    Vector r(2 * m);
    r.head(m).setOnes();
    r.tail(m).setConstant(-1.0);
    return r;
}

namespace detail {

inline void hessian_apply(const Vector& x, Vector& out, std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    const double st = x.head(m).sum();
    const double sp = x.tail(m).sum();
    out.resize(2 * m);
    out.head(m) = static_cast<double>(n) * x.head(m).array() + sp;
    out.tail(m) = static_cast<double>(n) * x.tail(m).array() + st;
}

inline Vector stationarity_rhs(const ScoreGrid& grid, std::size_t c) {
    const std::size_t n = grid.n_text;
    Vector rhs(2 * static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        rhs(static_cast<Eigen::Index>(i)) = pairwise_sum([&](std::size_t j) { return grid(i, j, c); }, n);
    for (std::size_t j = 0; j < n; ++j)
        rhs(static_cast<Eigen::Index>(n + j)) = pairwise_sum([&](std::size_t i) { return grid(i, j, c); }, n);
    return rhs;
}

/// Dense solve of (H + r r^T) x = rhs. Since rhs is orthogonal to r this is
/// the solution of H x = rhs with x orthogonal to the nullspace.
inline Vector solve_dense(const Vector& rhs, std::size_t n) {
    const Vector r = gauge_direction(n);
    Matrix a = stationarity_hessian(n) + r * r.transpose();
    return Eigen::LDLT<Matrix>(a).solve(rhs);
}

/// Matrix-free conjugate gradients on the consistent singular system H x = rhs;
/// iterates stay in range(H) when started from zero.
inline Vector solve_cg(const Vector& rhs, std::size_t n) {
    Vector x = Vector::Zero(rhs.size());
    Vector r = rhs;
    Vector p = r;
    Vector hp;
    double rr = r.squaredNorm();
    const double stop = 1e-28 * std::max(1.0, rhs.squaredNorm());
    for (std::size_t it = 0; it < 4 * n + 10 && rr > stop; ++it) {
        hessian_apply(p, hp, n);
        const double alpha = rr / p.dot(hp);
        x += alpha * p;
        r -= alpha * hp;
        const double rr_next = r.squaredNorm();
        p = r + (rr_next / rr) * p;
        rr = rr_next;
    }
    return x;
}

}  // namespace detail

/// Inputs up to this size use the dense factorization; larger ones use CG.
inline constexpr std::size_t kDenseSolveLimit = 64;

enum class SolveMethod { automatic, dense, conjugate_gradient };

/// Solves the stationarity system per channel and returns the solution in the
/// canonical gauge.
inline AdditiveDecomposition solve_exact(const ScoreGrid& grid, SolveMethod method = SolveMethod::automatic) {
    grid.validate();
    if (!grid.square()) throw InputError("solve_exact requires a square grid");
    const std::size_t n = grid.n_text;
    const auto m = static_cast<Eigen::Index>(n);
    const bool dense = method == SolveMethod::dense || (method == SolveMethod::automatic && n <= kDenseSolveLimit);

    AdditiveDecomposition dec{Matrix(m, grid.d), Matrix(m, grid.d), Vector::Zero(grid.d)};
    Vector hx;
    for (std::size_t c = 0; c < grid.d; ++c) {
        const Vector rhs = detail::stationarity_rhs(grid, c);
        const Vector x = dense ? detail::solve_dense(rhs, n) : detail::solve_cg(rhs, n);
        detail::hessian_apply(x, hx, n);
        const double residual = (hx - rhs).lpNorm<Eigen::Infinity>();
        if (!x.allFinite() || residual > 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
            throw NumericError("stationarity solve did not converge on channel " + std::to_string(c) +
                               " (residual " + std::to_string(residual) + ")");
        const auto ci = static_cast<Eigen::Index>(c);
        dec.tau.col(ci) = x.head(m);
        dec.phi.col(ci) = x.tail(m);
    }
    return canonicalize(std::move(dec));
}

/// Half squared-error loss with mu folded into the text side.
inline double half_loss(const ScoreGrid& grid, const AdditiveDecomposition& dec) {
    return 0.5 * projection_loss(grid, dec);
}

/// Analytic gradient of the half loss w.r.t. (tau + mu, phi), stacked per
/// channel as [text part; visual part]:
///   dL/dtau_i = n_v (tau_i + mu) + sum_j (phi_j - f_ij)
///   dL/dphi_j = n_t phi_j + sum_i (tau_i + mu - f_ij)
inline Matrix analytic_gradient(const ScoreGrid& grid, const AdditiveDecomposition& dec) {
    const std::size_t nt = grid.n_text, nv = grid.n_visual;
    Matrix g(static_cast<Eigen::Index>(nt + nv), static_cast<Eigen::Index>(grid.d));
    for (std::size_t c = 0; c < grid.d; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const double mu = dec.mu(ci);
        for (std::size_t i = 0; i < nt; ++i) {
            const double ti = dec.tau(static_cast<Eigen::Index>(i), ci) + mu;
            g(static_cast<Eigen::Index>(i), ci) = pairwise_sum(
                [&](std::size_t j) { return ti + dec.phi(static_cast<Eigen::Index>(j), ci) - grid(i, j, c); }, nv);
        }
        for (std::size_t j = 0; j < nv; ++j) {
            const double pj = dec.phi(static_cast<Eigen::Index>(j), ci);
            g(static_cast<Eigen::Index>(nt + j), ci) = pairwise_sum(
                [&](std::size_t i) { return dec.tau(static_cast<Eigen::Index>(i), ci) + mu + pj - grid(i, j, c); },
                nt);
        }
    }
    return g;
}

/// Central-difference gradient of the half loss, same layout as analytic_gradient.
inline Matrix numeric_gradient(const ScoreGrid& grid, const AdditiveDecomposition& dec, double step = 1e-5) {
    const std::size_t nt = grid.n_text, nv = grid.n_visual;
    Matrix g(static_cast<Eigen::Index>(nt + nv), static_cast<Eigen::Index>(grid.d));
    AdditiveDecomposition probe = dec;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(grid.d); ++c) {
        for (Eigen::Index k = 0; k < g.rows(); ++k) {
            const bool text = k < static_cast<Eigen::Index>(nt);
            double& p = text ? probe.tau(k, c) : probe.phi(k - static_cast<Eigen::Index>(nt), c);
            const double saved = p;
            p = saved + step;
            const double up = half_loss(grid, probe);
            p = saved - step;
            const double down = half_loss(grid, probe);
            p = saved;
            g(k, c) = (up - down) / (2.0 * step);
        }
    }
    return g;
}

/// Gradient checks of `dec` against `grid`. Hessian fields are left at zero
/// (see check_hessian).
inline StationarityReport check_stationarity(const ScoreGrid& grid, const AdditiveDecomposition& dec,
                                             bool finite_differences = true) {
    grid.validate();
    dec.validate();
    if (dec.n_text() != grid.n_text || dec.n_visual() != grid.n_visual || dec.d() != grid.d)
        throw InputError("grid and decomposition shapes differ");
    StationarityReport rep;
    const Matrix analytic = analytic_gradient(grid, dec);
    rep.grad_inf_norm = analytic.lpNorm<Eigen::Infinity>();
    rep.alg_loss = projection_loss(grid, dec);
    if (finite_differences)
        rep.fd_max_gap = (analytic - numeric_gradient(grid, dec)).lpNorm<Eigen::Infinity>();
    return rep;
}

struct HessianCheck {
    double min_quadform = std::numeric_limits<double>::infinity();
    double max_identity_rel_err = 0.0;
    double nullspace_residual = 0.0;
};

/// Samples z ~ N(0, 1)^{2n} and compares z^T H z (explicit matrix) with
/// sum_{i<=n<j} (z_i + z_j)^2; also evaluates ||H r||_inf.
inline HessianCheck check_hessian(std::size_t n, std::size_t samples, std::uint64_t seed) {
    if (n == 0 || samples == 0) throw InputError("check_hessian needs n >= 1 and samples >= 1");
    const Matrix h = stationarity_hessian(n);
    const auto m = static_cast<Eigen::Index>(n);
    HessianCheck out;
    out.nullspace_residual = (h * gauge_direction(n)).lpNorm<Eigen::Infinity>();
    Rng rng(stream_seed(seed, streams::kPerturb));
    Vector z(2 * m);
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& x : z) x = rng.normal();
        const double quad = z.dot(h * z);
        double identity = 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = m; j < 2 * m; ++j) identity += (z(i) + z(j)) * (z(i) + z(j));
        const double rel = std::abs(quad - identity) / std::max(std::abs(identity), 1e-300);
        out.max_identity_rel_err = std::max(out.max_identity_rel_err, rel);
        out.min_quadform = std::min(out.min_quadform, quad);
    }
    return out;
}

/// Sorted eigenvalues of H (dense symmetric solve).
inline Vector hessian_spectrum(std::size_t n) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(stationarity_hessian(n), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

struct PerturbationCheck {
    double base_loss = 0.0;
    double min_increase = std::numeric_limits<double>::infinity();  // min(perturbed - base)
    std::size_t decreases = 0;  // perturbations whose loss fell below base - tolerance
};

/// Loss change under `count` random perturbations of tau, phi and mu with
/// entries uniform in [-magnitude, magnitude].
inline PerturbationCheck perturbation_check(const ScoreGrid& grid, const AdditiveDecomposition& dec,
                                            std::size_t count, double magnitude, std::uint64_t seed) {
    PerturbationCheck out;
    out.base_loss = projection_loss(grid, dec);
    const double tol = 1e-12 * (1.0 + out.base_loss);
    Rng rng(stream_seed(seed, streams::kPerturb, 1));
    for (std::size_t s = 0; s < count; ++s) {
        AdditiveDecomposition p = dec;
        for (auto& x : p.tau.reshaped()) x += rng.uniform(-magnitude, magnitude);
        for (auto& x : p.phi.reshaped()) x += rng.uniform(-magnitude, magnitude);
        for (auto& x : p.mu) x += rng.uniform(-magnitude, magnitude);
        const double inc = projection_loss(grid, p) - out.base_loss;
        out.min_increase = std::min(out.min_increase, inc);
        if (inc < -tol) ++out.decreases;
    }
    return out;
}

/// Full verification: EMAP decomposition vs the direct solve, gradients at the
/// EMAP solution and Hessian structure for this n.
inline StationarityReport verify_grid(const ScoreGrid& grid, std::size_t hessian_samples = 100,
                                      std::uint64_t seed = 0) {
    grid.validate();
    if (!grid.square()) throw InputError("verify requires a square grid");
    const AdditiveDecomposition alg = emap_decompose(grid);
    const AdditiveDecomposition exact = solve_exact(grid);
    StationarityReport rep = check_stationarity(grid, alg);
    rep.oracle_loss = projection_loss(grid, exact);
    for (std::size_t i = 0; i < grid.n_text; ++i)
        for (std::size_t j = 0; j < grid.n_visual; ++j)
            for (std::size_t c = 0; c < grid.d; ++c)
                rep.max_pred_diff = std::max(rep.max_pred_diff, std::abs(alg.value(i, j, c) - exact.value(i, j, c)));
    const HessianCheck h = check_hessian(grid.n_text, hessian_samples, seed);
    rep.hessian_min_quadform = h.min_quadform;
    rep.hessian_identity_rel_err = h.max_identity_rel_err;
    rep.nullspace_residual = h.nullspace_residual;
    return rep;
}

inline io::json report_to_json(const StationarityReport& r) {
    return {{"oracle_loss", r.oracle_loss},
            {"alg_loss", r.alg_loss},
            {"max_pred_diff", r.max_pred_diff},
            {"grad_inf_norm", r.grad_inf_norm},
            {"fd_max_gap", r.fd_max_gap},
            {"hessian_min_quadform", r.hessian_min_quadform},
            {"hessian_identity_rel_err", r.hessian_identity_rel_err},
            {"nullspace_residual", r.nullspace_residual}};
}

}  // namespace emap
