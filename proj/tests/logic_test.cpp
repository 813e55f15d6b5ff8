#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "emap/logic.hpp"
#include "emap/logic_fit.hpp"

namespace emap::logic {
namespace {

BooleanTable xor1() { return BooleanTable::from_cells(1, {0, 1, 1, 0}); }
BooleanTable xnor1() { return BooleanTable::from_cells(1, {1, 0, 0, 1}); }
BooleanTable and1() { return BooleanTable::from_cells(1, {0, 0, 0, 1}); }

std::string example_formula() {
    std::ifstream in(std::string(EMAP_FIXTURES_DIR) + "/example_formula.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
    return s;
}

// Exhaustive search for integer tau, phi in [0, 2] and theta in {0.5, ..., 4.5}.
// Any 2 x 2 threshold table has such a witness (rank rows and columns).
bool brute_force_representable_2x2(const BooleanTable& t) {
    for (int a0 = 0; a0 <= 2; ++a0)
        for (int a1 = 0; a1 <= 2; ++a1)
            for (int b0 = 0; b0 <= 2; ++b0)
                for (int b1 = 0; b1 <= 2; ++b1)
                    for (int th = 0; th <= 4; ++th) {
                        const int tau[2] = {a0, a1}, phi[2] = {b0, b1};
                        bool ok = true;
                        for (int i = 0; i < 2 && ok; ++i)
                            for (int j = 0; j < 2 && ok; ++j)
                                ok = ((tau[i] + phi[j] > th + 0.5) == static_cast<bool>(t.at(i, j)));
                        if (ok) return true;
                    }
    return false;
}

// Rows sorted by their number of ones must be nested as column sets.
bool chain_representable(const BooleanTable& t) {
    std::vector<std::size_t> rows(t.side());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    auto ones = [&](std::size_t i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < t.side(); ++j) k += t.at(i, j);
        return k;
    };
    std::sort(rows.begin(), rows.end(), [&](auto a, auto b) { return ones(a) < ones(b); });
    for (std::size_t k = 0; k + 1 < rows.size(); ++k)
        for (std::size_t j = 0; j < t.side(); ++j)
            if (t.at(rows[k], j) && !t.at(rows[k + 1], j)) return false;
    return true;
}

TEST(Parse, AndNot) { EXPECT_EQ(parse_formula("t1 & !v1").to_string(), "AND(t1,NOT(v1))"); }

TEST(Parse, ExampleFormulaHasThreeClauses) {
    const auto ast = parse_formula(example_formula(), 2);
    EXPECT_EQ(ast.disjunct_count(), 3u);
    EXPECT_EQ(ast.to_string(),
              "OR(OR(AND(t2,NOT(v2)),AND(AND(t1,t2),v1)),AND(AND(NOT(t1),NOT(v1)),NOT(v2)))");
}

TEST(Parse, PrecedenceAndAssociativity) {
    EXPECT_EQ(parse_formula("t1 | t2 & v1").to_string(), "OR(t1,AND(t2,v1))");
    EXPECT_EQ(parse_formula("t1 | t2 | v1").to_string(), "OR(OR(t1,t2),v1)");
    EXPECT_EQ(parse_formula("t1 & t2 & v1").to_string(), "AND(AND(t1,t2),v1)");
    EXPECT_EQ(parse_formula("!t1 & v1").to_string(), "AND(NOT(t1),v1)");
    EXPECT_EQ(parse_formula("!(t1 & v1)").to_string(), "NOT(AND(t1,v1))");
    EXPECT_EQ(parse_formula("!!t1").to_string(), "NOT(NOT(t1))");
    EXPECT_EQ(parse_formula("  ( t1 )").to_string(), "t1");
}

TEST(Parse, UnicodeAliases) {
    EXPECT_EQ(parse_formula("(t2 ∧ ¬v2) ∨ (t1 ∧ t2 ∧ v1)").to_string(), parse_formula("(t2 & !v2) | (t1 & t2 & v1)").to_string());
}

TEST(Parse, SyntaxErrorsCarryPositions) {
    auto pos = [](const std::string& s) -> std::size_t {
        try {
            parse_formula(s);
        } catch (const ParseError& e) {
            return e.position();
        }
        return 999;
    };
    EXPECT_EQ(pos("t1 &"), 4u);
    EXPECT_EQ(pos("t1 v1"), 3u);
    EXPECT_EQ(pos("(t1"), 3u);
    EXPECT_EQ(pos("t1)"), 2u);
    EXPECT_EQ(pos("x1"), 0u);
    EXPECT_EQ(pos("t"), 1u);
    EXPECT_EQ(pos("t0"), 0u);
    EXPECT_EQ(pos(""), 0u);
    try {
        parse_formula("t1 &");
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("end of input"), std::string::npos);
    }
}

TEST(Parse, UndeclaredVariable) {
    EXPECT_THROW(parse_formula("t1 & v3", 2), InputError);
    EXPECT_THROW(table_from_formula(parse_formula("t3"), 2), InputError);
}

TEST(Table, SingleVariable) {
    EXPECT_EQ(table_from_formula(parse_formula("t1"), 1), BooleanTable::from_cells(1, {0, 0, 1, 1}));
    EXPECT_EQ(table_from_formula(parse_formula("v1"), 1), BooleanTable::from_cells(1, {0, 1, 0, 1}));
}

TEST(Table, XorFormula) {
    EXPECT_EQ(table_from_formula(parse_formula("(t1 & !v1) | (!t1 & v1)"), 1), xor1());
}

TEST(Table, ExampleFormulaCells) {
    const auto t = table_from_formula(parse_formula(example_formula()), 2);
    // t = (1, 1) is index 3; v = (1, 0) is index 1 (bit 0 is variable 1).
    EXPECT_EQ(t.at(3, 1), 1);
    // Direct evaluation of the three clauses at every cell.
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const bool t1 = i & 1, t2 = i & 2, v1 = j & 1, v2 = j & 2;
            const bool f = (t2 && !v2) || (t1 && t2 && v1) || (!t1 && !v1 && !v2);
            EXPECT_EQ(t.at(i, j), f) << i << "," << j;
        }
}

TEST(Representable, Examples) {
    EXPECT_FALSE(is_representable(xor1()));
    EXPECT_FALSE(is_representable(xnor1()));
    EXPECT_TRUE(is_representable(and1()));
    EXPECT_TRUE(is_representable(BooleanTable(1)));
    EXPECT_TRUE(is_representable(BooleanTable(3)));
}

TEST(Representable, OracleExamples) {
    EXPECT_FALSE(representable_oracle(xnor1()));
    EXPECT_TRUE(representable_oracle(and1()));
    EXPECT_TRUE(representable_oracle(table_from_formula(parse_formula(example_formula()), 2)));
    EXPECT_THROW(representable_oracle(BooleanTable(5)), CapabilityError);
}

TEST(Representable, CensusOfAllSixteen) {
    std::size_t fast = 0, oracle = 0, brute = 0;
    for (std::uint64_t code = 0; code < 16; ++code) {
        const auto t = BooleanTable::from_code(1, code);
        fast += is_representable(t);
        oracle += representable_oracle(t);
        brute += brute_force_representable_2x2(t);
        EXPECT_EQ(is_representable(t), brute_force_representable_2x2(t)) << code;
        EXPECT_EQ(representable_oracle(t), brute_force_representable_2x2(t)) << code;
    }
    EXPECT_EQ(fast, 14u);
    EXPECT_EQ(oracle, 14u);
    EXPECT_EQ(brute, 14u);
    const auto c = representability_census(1);
    EXPECT_EQ(c.representable, 14u);
    EXPECT_EQ(c.total, 16u);
    ASSERT_EQ(c.failures.size(), 2u);
    EXPECT_EQ(BooleanTable::from_code(1, c.failures[0]), xor1());
    EXPECT_EQ(BooleanTable::from_code(1, c.failures[1]), xnor1());
}

TEST(Representable, AllN2TablesMatchTheChainCheck) {
    std::size_t count = 0;
    for (std::uint64_t code = 0; code < 65536; ++code) {
        const auto t = BooleanTable::from_code(2, code);
        const bool expected = chain_representable(t);
        ASSERT_EQ(is_representable(t), expected) << code;
        count += expected;
    }
    EXPECT_EQ(representability_census(2).representable, count);
}

TEST(Representable, OracleAgreesOnRandomTables) {
    for (int n : {2, 3, 4}) {
        Rng rng(stream_seed(11, streams::kTable, static_cast<std::uint64_t>(n)));
        std::size_t positives = 0;
        for (int s = 0; s < 1000; ++s) {
            // Mix uniform tables with random threshold tables so both answers occur.
            BooleanTable t(n);
            if (s % 2) {
                t = sample_table(n, rng, false);
            } else {
                std::vector<double> a(t.side()), b(t.side());
                for (auto& x : a) x = rng.uniform();
                for (auto& x : b) x = rng.uniform();
                const double theta = rng.uniform(0.5, 1.5);
                for (std::size_t i = 0; i < t.side(); ++i)
                    for (std::size_t j = 0; j < t.side(); ++j) t.set(i, j, a[i] + b[j] > theta);
            }
            const bool fast = is_representable(t);
            ASSERT_EQ(fast, representable_oracle(t)) << "n=" << n << " sample " << s;
            ASSERT_EQ(fast, chain_representable(t));
            positives += fast;
        }
        EXPECT_GE(positives, 500u);
        EXPECT_LT(positives, 1000u);
    }
}

TEST(Representable, WitnessFitsWheneverFound) {
    for (std::uint64_t code = 0; code < 65536; code += 7) {
        const auto t = BooleanTable::from_code(2, code);
        const auto w = representable_witness(t);
        if (w) {
            EXPECT_TRUE(witness_fits(t, *w)) << code;
        }
    }
}

TEST(Representable, InvariantUnderTransposeAndComplement) {
    Rng rng(5);
    for (int s = 0; s < 500; ++s) {
        const auto t = sample_table(1 + s % 3, rng, false);
        const bool r = is_representable(t);
        EXPECT_EQ(is_representable(t.transposed()), r);
        EXPECT_EQ(is_representable(t.complemented()), r);
    }
}

TEST(Sampling, XorFrequencyMatchesUniform) {
    Rng rng(stream_seed(3, streams::kTable));
    std::size_t xors = 0;
    const std::size_t total = 16000;
    for (std::size_t s = 0; s < total; ++s) {
        const auto t = sample_table(1, rng, false);
        xors += t == xor1() || t == xnor1();
    }
    // Expected 2000; binomial sd is about 42.
    EXPECT_NEAR(static_cast<double>(xors), 2000.0, 210.0);
}

TEST(Sampling, NonconstantOnRequest) {
    Rng rng(9);
    for (int s = 0; s < 2000; ++s) EXPECT_FALSE(sample_table(1, rng, true).constant());
}

TEST(Sampling, SameSeedSameTable) {
    EXPECT_EQ(sample_table(3, std::uint64_t{4}, true), sample_table(3, std::uint64_t{4}, true));
    EXPECT_NE(sample_table(3, std::uint64_t{4}, true), sample_table(3, std::uint64_t{5}, true));
}

TEST(Sampling, N3TablesAreAlmostNeverRepresentable) {
    Rng rng(stream_seed(0, streams::kTable, 3));
    std::size_t hits = 0;
    for (int s = 0; s < 10000; ++s) hits += is_representable(sample_table(3, rng, true));
    EXPECT_LT(hits, 100u);
}

TEST(Sampling, CircuitSamplerGivesValidTables) {
    Rng rng(8);
    for (int s = 0; s < 200; ++s) {
        const auto t = sample_function(2, rng, true, Sampler::circuit);
        EXPECT_EQ(t.cells.size(), 16u);
        EXPECT_FALSE(t.constant());
    }
}

TEST(FitAuc, RepresentableN1TablesGetPerfectEmapAuc) {
    for (std::uint64_t code = 1; code < 15; ++code) {
        const auto t = BooleanTable::from_code(1, code);
        if (!is_representable(t)) continue;
        EXPECT_EQ(additive_fit_auc(t, FitMethod::emap), 1.0) << code;
        EXPECT_EQ(additive_fit_auc(t, FitMethod::adaboost_unimodal), 1.0) << code;
    }
}

TEST(FitAuc, XorIsAtChance) {
    EXPECT_EQ(additive_fit_auc(xor1(), FitMethod::emap), 0.5);
    EXPECT_EQ(additive_fit_auc(xor1(), FitMethod::adaboost_unimodal), 0.5);
    EXPECT_EQ(additive_fit_auc(xor1(), FitMethod::adaboost_full), 1.0);
}

TEST(FitAuc, ConstantTableIsUndefined) {
    for (auto m : kFitMethods) EXPECT_THROW(additive_fit_auc(BooleanTable(2), m), UndefinedMetric);
}

TEST(FitAuc, FullBoostingFitsEveryTable) {
    Rng rng(21);
    for (int n = 1; n <= 4; ++n)
        for (int s = 0; s < 50; ++s) EXPECT_EQ(additive_fit_auc(sample_table(n, rng, true), FitMethod::adaboost_full), 1.0);
}

// Representable n = 2 tables: the projection never ranks a 0-cell above a
// 1-cell, though ties between them do occur (1152 of the 6900 nonconstant
// tables, counted by brute force).
TEST(FitAuc, N2RepresentableTablesAreWeaklySeparated) {
    std::size_t tables = 0, below_one = 0;
    for (std::uint64_t code = 1; code + 1 < 65536; ++code) {
        const auto t = BooleanTable::from_code(2, code);
        if (!is_representable(t)) continue;
        ++tables;
        const auto s = additive_fit_scores(t, FitMethod::emap);
        double min_one = 1e300, max_zero = -1e300;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (t.cells[k]) min_one = std::min(min_one, s[k]);
            else max_zero = std::max(max_zero, s[k]);
        }
        EXPECT_GE(min_one, max_zero - 1e-12) << code;
        below_one += additive_fit_auc(t, FitMethod::emap) < 1.0;
    }
    EXPECT_EQ(tables, 6900u);
    EXPECT_EQ(below_one, 1152u);
}

TEST(FitAuc, CorruptingARepresentableTableDoesNotHelp) {
    Rng rng(31);
    std::size_t trials = 0, not_worse = 0;
    while (trials < 300) {
        auto t = sample_table(2, rng, true);
        if (!is_representable(t)) continue;
        auto bad = t;
        const auto k = rng.below(bad.cells.size());
        bad.cells[k] ^= 1;
        if (is_representable(bad) || bad.constant()) continue;
        ++trials;
        not_worse += additive_fit_auc(t, FitMethod::emap) >= additive_fit_auc(bad, FitMethod::emap);
    }
    EXPECT_GE(not_worse, 285u);
}

TEST(Fig2, DeterministicAcrossThreadCounts) {
    Fig2Options o;
    o.n_max = 3;
    o.samples = 40;
    o.seed = 2;
    const auto a = fig2_csv(run_fig2(o));
    o.threads = 3;
    EXPECT_EQ(fig2_csv(run_fig2(o)), a);
    o.seed = 3;
    EXPECT_NE(fig2_csv(run_fig2(o)), a);
}

TEST(Fig2, TrendAndCsvShape) {
    Fig2Options o;
    o.samples = 150;
    const auto rows = run_fig2(o);
    ASSERT_EQ(rows.size(), 12u);
    const std::string csv = fig2_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,method,mean_auc,std_auc,samples");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
    for (const auto& r : rows) {
        if (r.method == FitMethod::adaboost_full) {
            EXPECT_EQ(r.mean_auc, 1.0);
        }
        if (r.n == 1 && r.method != FitMethod::adaboost_full) {
            EXPECT_GT(r.mean_auc, 0.9);
        }
    }
    for (std::size_t k = 3; k < rows.size(); ++k) {
        if (rows[k].method != FitMethod::adaboost_full) {
            EXPECT_LT(rows[k].mean_auc, rows[k - 3].mean_auc);
        }
    }
}

TEST(Fig2, RejectsBadRanges) {
    Fig2Options o;
    o.n_min = 3;
    o.n_max = 2;
    EXPECT_THROW(run_fig2(o), InputError);
    o.n_min = 0;
    EXPECT_THROW(run_fig2(o), InputError);
}

}  // namespace
}  // namespace emap::logic
