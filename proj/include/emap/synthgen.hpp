#pragma once

// Synthetic bimodal task whose label is the sign of a latent dot product, so
// predicting it requires a multiplicative cross-modal interaction.
//
//   1. Sample projections P_text (d1 x d) and P_visual (d2 x d) from U(-.5, .5).
//   2. Sample latent t, v ~ N(0, I_d); normalize both to unit length.
//   3. Reject unless |v . t| > delta.
//   4. y = 1[v . t > 0]; emit (P_text t, P_visual v, y).
//
// Random streams: projections use streams::kProjection; point p uses its own
// stream (streams::kPoint, p); the split permutation uses streams::kSplit.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "emap/dataset.hpp"
#include "emap/rng.hpp"

namespace emap {

struct SynthParams {
    std::size_t d = 10;
    std::size_t d1 = 60;  // text feature dim
    std::size_t d2 = 40;  // visual feature dim
    double delta = 0.25;
    std::size_t n = 5000;
    std::array<double, 3> split = {0.8, 0.1, 0.1};
    std::uint64_t seed = 0;
    bool audit = false;

    void validate() const {
        if (d < 1 || d1 < 1 || d2 < 1 || n < 1) throw InputError("synth: d, d1, d2 and n must be >= 1");
        if (!(delta >= 0.0 && delta < 1.0)) throw InputError("synth: delta must lie in [0, 1)");
        double total = 0.0;
        for (double f : split) {
            if (!(f > 0.0)) throw InputError("synth: split fractions must be positive");
            total += f;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InputError("synth: split fractions must sum to 1");
    }

    io::json to_json() const {
        return {{"generator", "synthetic-dot-sign"},
                {"d", d},
                {"d1", d1},
                {"d2", d2},
                {"delta", delta},
                {"n", n},
                {"split", split},
                {"seed", seed},
                {"audit", audit}};
    }

    static SynthParams from_json(const io::json& j) {
        SynthParams p;
        try {
            p.d = j.value("d", p.d);
            p.d1 = j.value("d1", p.d1);
            p.d2 = j.value("d2", p.d2);
            p.delta = j.value("delta", p.delta);
            p.n = j.value("n", p.n);
            if (j.contains("split")) p.split = j.at("split").get<std::array<double, 3>>();
            p.seed = j.value("seed", p.seed);
            p.audit = j.value("audit", p.audit);
        } catch (const io::json::exception& e) {
            throw InputError(std::string("synth params: ") + e.what());
        }
        return p;
    }
};

/// Item counts per split: round(f * n) for train and val, remainder to test.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions) {
    const auto train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    if (train + val >= n || train == 0 || val == 0)
        throw InputError("synth: n = " + std::to_string(n) + " is too small for a non-empty train/val/test split");
    return {train, val, n - train - val};
}

inline PairedDataset generate_synthetic(const SynthParams& params) {
    params.validate();
    const auto counts = split_counts(params.n, params.split);
    const auto d = static_cast<Eigen::Index>(params.d);

    Rng proj_rng(stream_seed(params.seed, streams::kProjection));
    Matrix proj_text(static_cast<Eigen::Index>(params.d1), d);
    Matrix proj_visual(static_cast<Eigen::Index>(params.d2), d);
    for (auto& x : proj_text.reshaped<Eigen::RowMajor>()) x = proj_rng.uniform(-0.5, 0.5);
    for (auto& x : proj_visual.reshaped<Eigen::RowMajor>()) x = proj_rng.uniform(-0.5, 0.5);

    PairedDataset ds;
    ds.num_classes = 2;
    ds.config = params.to_json();
    const auto n = static_cast<Eigen::Index>(params.n);
    Matrix latent_t(n, d), latent_v(n, d);
    ds.labels.resize(params.n);

    const std::uint64_t budget = 10000ULL * params.n;
    std::uint64_t attempts = 0;
    Vector t(d), v(d);
    auto draw_unit = [&](Rng& rng, Vector& x) {
        double norm = 0.0;
        while (norm == 0.0) {
            for (auto& e : x) e = rng.normal();
            norm = x.norm();
        }
        x /= norm;
    };
    for (Eigen::Index p = 0; p < n; ++p) {
        Rng rng(stream_seed(params.seed, streams::kPoint, static_cast<std::uint64_t>(p)));
        double dot = 0.0;
        do {
            if (++attempts > budget)
                throw NumericError("synth: rejection sampling exceeded " + std::to_string(budget) +
                                   " attempts (delta too large for d)");
            draw_unit(rng, v);
            draw_unit(rng, t);
            dot = v.dot(t);
        } while (!(std::abs(dot) > params.delta));
        latent_t.row(p) = t.transpose();
        latent_v.row(p) = v.transpose();
        ds.labels[static_cast<std::size_t>(p)] = dot > 0.0 ? 1 : 0;
    }
    ds.t = latent_t * proj_text.transpose();
    ds.v = latent_v * proj_visual.transpose();

    std::vector<std::size_t> order(params.n);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng split_rng(stream_seed(params.seed, streams::kSplit));
    split_rng.shuffle(order);
    ds.splits.assign(params.n, Split::test);
    for (std::size_t k = 0; k < counts[0]; ++k) ds.splits[order[k]] = Split::train;
    for (std::size_t k = counts[0]; k < counts[0] + counts[1]; ++k) ds.splits[order[k]] = Split::val;

    if (params.audit) {
        ds.latent_t = std::move(latent_t);
        ds.latent_v = std::move(latent_v);
    }
    ds.validate();
    return ds;
}

}  // namespace emap
