#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "emap/grid.hpp"
#include "emap/grid_io.hpp"
#include "emap/oracle.hpp"
#include "test_util.hpp"

namespace emap {
namespace {

using testing::additive_grid;
using testing::golden_grid;
using testing::random_grid;

TEST(BuildGrid, ConstantScorer) {
    auto scorer = [](std::span<const double>, std::span<const double>) { return std::vector<double>{1.0}; };
    const auto g = build_grid(scorer, {{0.0}, {1.0}}, {{2.0}, {3.0}});
    EXPECT_EQ(g.n_text, 2u);
    EXPECT_EQ(g.d, 1u);
    for (double x : g.values) EXPECT_EQ(x, 1.0);
}

TEST(BuildGrid, DotProductScorer) {
    auto dot = [](std::span<const double> t, std::span<const double> v) {
        double s = 0;
        for (std::size_t k = 0; k < t.size(); ++k) s += t[k] * v[k];
        return std::vector<double>{s};
    };
    const auto g = build_grid(dot, {{1.0}, {2.0}}, {{3.0}, {4.0}});
    EXPECT_EQ(g.values, (std::vector<double>{3, 4, 6, 8}));
}

TEST(BuildGrid, LengthMismatchIsInputError) {
    auto scorer = [](std::span<const double>, std::span<const double>) { return std::vector<double>{0.0}; };
    EXPECT_THROW(build_grid(scorer, {{1.0}, {2.0}}, {{3.0}}), InputError);
    EXPECT_THROW(build_grid(scorer, {{1.0}, {2.0, 3.0}}, {{3.0}, {4.0}}), InputError);
}

TEST(BuildGrid, NonFiniteOutputNamesCell) {
    auto scorer = [](std::span<const double> t, std::span<const double> v) {
        return std::vector<double>{t[0] == 1.0 && v[0] == 0.0 ? NAN : 0.0};
    };
    try {
        build_grid(scorer, {{0.0}, {1.0}}, {{1.0}, {0.0}});
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("(1, 1)"), std::string::npos) << e.what();
    }
}

TEST(BuildGrid, ThreadCountDoesNotChangeBytes) {
    auto scorer = [](std::span<const double> t, std::span<const double> v) {
        return std::vector<double>{std::sin(t[0] * v[0]), t[0] - v[0]};
    };
    std::vector<std::vector<double>> texts, visuals;
    for (int k = 0; k < 37; ++k) {
        texts.push_back({0.1 * k});
        visuals.push_back({0.3 * k - 2});
    }
    const auto a = build_grid(scorer, texts, visuals, 1);
    const auto b = build_grid(scorer, texts, visuals, 5);
    EXPECT_EQ(a.values, b.values);
}

TEST(EmapDecompose, WorkedThreeByThreeExample) {
    const auto dec = emap_decompose(golden_grid());
    EXPECT_EQ(dec.mu(0), 0.6);
    const double row_means[] = {-1.2 / 3, 4.9 / 3, 1.7 / 3};
    const double col_means[] = {0.6 / 3, 3.2 / 3, 1.6 / 3};
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(dec.tau(k, 0) + dec.mu(0), row_means[k], 1e-12);
        EXPECT_NEAR(dec.phi(k, 0) + dec.mu(0), col_means[k], 1e-12);
    }
    const Matrix preds = emap_predictions(dec);
    const double expected[] = {-0.8, 2.1, 0.5};
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(preds(k, 0), expected[k], 1e-12);
}

TEST(EmapDecompose, ZeroGrid) {
    const auto dec = emap_decompose(ScoreGrid(4, 4, 2));
    EXPECT_TRUE(dec.tau.isZero(0));
    EXPECT_TRUE(dec.phi.isZero(0));
    EXPECT_TRUE(dec.mu.isZero(0));
    EXPECT_TRUE(emap_predictions(dec).isZero(0));
}

TEST(EmapDecompose, AdditiveGridIsFixedPoint) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = additive_grid(8, 8, 3, seed);
        EXPECT_LT(max_residual(g, emap_decompose(g)), 1e-12);
    }
}

TEST(EmapDecompose, CanonicalGauge) {
    const auto g = random_grid(9, 7, 3, 11);
    const auto dec = emap_decompose(g);
    for (Eigen::Index c = 0; c < 3; ++c) {
        EXPECT_NEAR(dec.tau.col(c).mean(), 0.0, 1e-14);
        EXPECT_NEAR(dec.phi.col(c).mean(), 0.0, 1e-14);
    }
}

TEST(EmapDecompose, RectangularGridDecomposesButHasNoDiagonal) {
    const auto g = additive_grid(5, 3, 2, 4);
    const auto dec = emap_decompose(g);
    EXPECT_EQ(dec.n_text(), 5u);
    EXPECT_EQ(dec.n_visual(), 3u);
    EXPECT_LT(max_residual(g, dec), 1e-12);
    EXPECT_THROW(emap_predictions(dec), InputError);
}

TEST(EmapPredictions, DiagonalOfReconstruction) {
    const auto dec = emap_decompose(random_grid(5, 5, 3, 3));
    const Matrix preds = emap_predictions(dec);
    const auto full = reconstruct(dec);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            EXPECT_EQ(preds(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)), full(i, i, c));
}

TEST(ProjectionLoss, ExactFitIsZero) {
    const auto g = additive_grid(6, 6, 2, 8);
    EXPECT_LT(projection_loss(g, emap_decompose(g)), 1e-12);
}

TEST(ProjectionLoss, GoldenGridIsPositiveAndMinimal) {
    const auto g = golden_grid();
    const auto dec = emap_decompose(g);
    const double loss = projection_loss(g, dec);
    EXPECT_GT(loss, 0.0);
    const auto check = perturbation_check(g, dec, 1000, 1.0, 42);
    EXPECT_EQ(check.decreases, 0u);
    EXPECT_GT(check.min_increase, 0.0);
}

TEST(ProjectionLoss, ChannelsDecouple) {
    const auto a = random_grid(6, 6, 1, 1);
    const auto b = random_grid(6, 6, 1, 2);
    ScoreGrid stacked(6, 6, 2);
    for (std::size_t k = 0; k < 36; ++k) {
        stacked.values[2 * k] = a.values[k];
        stacked.values[2 * k + 1] = b.values[k];
    }
    const auto ds = emap_decompose(stacked);
    const auto da = emap_decompose(a);
    const auto db = emap_decompose(b);
    EXPECT_NEAR(projection_loss(stacked, ds), projection_loss(a, da) + projection_loss(b, db), 1e-12);
    // Projecting the stacked grid equals projecting each channel on its own.
    EXPECT_EQ(ds.tau.col(0), da.tau.col(0));
    EXPECT_EQ(ds.phi.col(1), db.phi.col(0));
    EXPECT_EQ(ds.mu(1), db.mu(0));
    EXPECT_THROW(projection_loss(a, ds), InputError);
}

TEST(EmapProperties, Idempotent) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const std::size_t n = 1 + seed % 9;
        const auto dec = emap_decompose(random_grid(n, n + seed % 3, 1 + seed % 4, seed, 3.0));
        const auto again = emap_decompose(reconstruct(dec));
        EXPECT_LE((again.tau - dec.tau).lpNorm<Eigen::Infinity>(), 1e-10);
        EXPECT_LE((again.phi - dec.phi).lpNorm<Eigen::Infinity>(), 1e-10);
        EXPECT_LE((again.mu - dec.mu).lpNorm<Eigen::Infinity>(), 1e-10);
    }
}

TEST(EmapProperties, GaugeShiftLeavesPredictionsUnchanged) {
    const auto g = random_grid(7, 7, 3, 5);
    const auto dec = emap_decompose(g);
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const double c = rng.uniform(-10, 10);
        AdditiveDecomposition shifted = dec;
        shifted.tau.array() += c;
        shifted.phi.array() -= c;
        const Matrix diff = emap_predictions(canonicalize(shifted)) - emap_predictions(dec);
        EXPECT_LE(diff.lpNorm<Eigen::Infinity>(), 1e-12);
    }
}

TEST(EmapProperties, MeanPreserved) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto g = random_grid(6, 4, 2, seed);
        const auto rec = reconstruct(emap_decompose(g));
        for (std::size_t c = 0; c < 2; ++c) {
            const auto get_g = [&](std::size_t k) { return g.values[k * 2 + c]; };
            const auto get_r = [&](std::size_t k) { return rec.values[k * 2 + c]; };
            EXPECT_NEAR(pairwise_mean(get_g, 24), pairwise_mean(get_r, 24), 1e-14);
        }
    }
}

TEST(EmapProperties, Deterministic) {
    const auto g = random_grid(40, 40, 3, 17);
    const auto a = decomposition_to_binary(emap_decompose(g));
    const auto b = decomposition_to_binary(emap_decompose(g));
    EXPECT_EQ(a, b);
}

TEST(PairwiseSum, CorrectlyRoundedMean) {
    // Plain left-to-right summation gives 0.6000000000000001 here.
    const std::vector<double> xs = {-1.3, 0.3, -0.2, 0.8, 3.0, 1.1, 1.1, -0.1, 0.7};
    EXPECT_EQ(pairwise_mean(xs), 0.6);
    std::vector<double> big(1000, 0.1);
    EXPECT_EQ(pairwise_mean(big), 0.1);
}

TEST(GridIo, JsonAndBinaryRoundTripBitExact) {
    const auto dir = std::filesystem::temp_directory_path() / "emap_grid_io";
    std::filesystem::create_directories(dir);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto g = random_grid(1 + seed, 1 + seed + (seed % 2), 1 + seed % 3, seed, 1e3);
        for (std::size_t i = 0; i < g.n_text; ++i) g.text_ids.push_back("t" + std::to_string(i));
        for (std::size_t j = 0; j < g.n_visual; ++j) g.visual_ids.push_back("v" + std::to_string(j));
        write_grid(dir / "g.json", g);
        write_grid(dir / "g.bin", g);
        const auto from_json = read_grid(dir / "g.json");
        const auto from_bin = read_grid(dir / "g.bin");
        EXPECT_EQ(from_json.values, g.values);
        EXPECT_EQ(from_json.text_ids, g.text_ids);
        EXPECT_EQ(from_bin.values, g.values);
        EXPECT_EQ(from_bin.n_visual, g.n_visual);

        const auto dec = emap_decompose(g);
        write_decomposition(dir / "d.json", dec);
        write_decomposition(dir / "d.bin", dec);
        EXPECT_EQ(read_decomposition(dir / "d.json").tau, dec.tau);
        EXPECT_EQ(read_decomposition(dir / "d.bin").phi, dec.phi);
    }
}

TEST(GridIo, BinaryLayout) {
    ScoreGrid g(1, 1, 1);
    g.values = {1.0};
    const auto bytes = grid_to_binary(g);
    ASSERT_EQ(bytes.size(), 8u + 4 + 8 + 8 + 8);
    EXPECT_EQ(bytes.substr(0, 8), "EMAPGRID");
    EXPECT_EQ(bytes[8], 1);  // version, little-endian
    EXPECT_EQ(bytes[12], 1);  // n
    EXPECT_EQ(bytes[20], 1);  // d
    EXPECT_EQ(static_cast<unsigned char>(bytes[35]), 0x3f);  // 1.0 high byte
}

TEST(GridIo, MalformedInputs) {
    EXPECT_THROW(grid_from_binary("EMAPGRID"), InputError);
    EXPECT_THROW(grid_from_binary(grid_to_binary(random_grid(2, 2, 1, 0)).substr(0, 30)), InputError);
    EXPECT_THROW(grid_from_json(io::json::parse(R"({"n": 2, "d": 1, "values": [[1, 2]]})")), InputError);
    EXPECT_THROW(grid_from_json(io::json::parse(R"({"n": 1, "d": 1, "values": [[[1, 2]]]})")), InputError);
    EXPECT_THROW(read_grid("/nonexistent/grid.json"), InputError);
}

TEST(GridIo, FixtureMatchesWorkedExample) {
    const auto g = read_grid(std::filesystem::path(EMAP_FIXTURES_DIR) / "appendix_g.json");
    EXPECT_EQ(g.values, golden_grid().values);
}

}  // namespace
}  // namespace emap
