#include <cmath>

#include <gtest/gtest.h>

#include "fragkin/model.hpp"
#include "oracles.hpp"

using namespace fragkin;

TEST(Coefficients, RandomScission) {
    const auto m = FragmentationModel::random_scission();
    EXPECT_EQ(eval_a(m, 5), 4.0);
    EXPECT_EQ(eval_a(m, 1), 0.0);
    EXPECT_DOUBLE_EQ(eval_b(m, 3, 7), 1.0 / 3.0);
    EXPECT_EQ(eval_b(m, 4, 4), 0.0);
    EXPECT_EQ(eval_b(m, 6, 4), 0.0);
    EXPECT_EQ(*m.exact_b(3, 7), Rational(1, 3));
}

TEST(Coefficients, BinaryChipOff) {
    const auto m = FragmentationModel::binary_chip_off();
    EXPECT_EQ(eval_a(m, 1), 0.0);
    EXPECT_EQ(eval_a(m, 2), 2.0);
    EXPECT_EQ(eval_a(m, 9), 9.0);
    EXPECT_EQ(eval_b(m, 1, 2), 2.0);
    EXPECT_EQ(eval_b(m, 1, 5), 1.0);
    EXPECT_EQ(eval_b(m, 4, 5), 1.0);
    EXPECT_EQ(eval_b(m, 2, 5), 0.0);
    EXPECT_EQ(eval_b(m, 3, 5), 0.0);
    EXPECT_EQ(eval_b(m, 4, 4), 0.0);
}

TEST(Coefficients, UniformBinary) {
    const auto m = FragmentationModel::uniform_binary(1.5);
    EXPECT_EQ(eval_a(m, 1), 0.0);
    EXPECT_DOUBLE_EQ(eval_a(m, 4), 8.0);
    EXPECT_DOUBLE_EQ(eval_b(m, 2, 5), 0.5);
    EXPECT_EQ(eval_a(FragmentationModel::uniform_binary(1.0, 1.0), 1), 1.0);
    EXPECT_THROW(FragmentationModel::uniform_binary(1.0, -1.0), Error);
}

TEST(Coefficients, IndexZeroAndSmallJAreRejected) {
    const auto m = FragmentationModel::random_scission();
    EXPECT_THROW(eval_a(m, 0), Error);
    EXPECT_THROW(eval_b(m, 0, 3), Error);
    EXPECT_THROW(eval_b(m, 1, 1), Error);
}

TEST(Table, StoredValuesAndOverrun) {
    const auto m = FragmentationModel::table({0.0, 0.0, 0.0}, {});
    EXPECT_EQ(eval_a(m, 2), 0.0);
    EXPECT_EQ(eval_b(m, 1, 3), 0.0);
    try {
        eval_a(m, 4);
        FAIL() << "expected IndexOutOfRange";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
    }
    try {
        eval_b(m, 1, 4);
        FAIL() << "expected IndexOutOfRange";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
    }
}

TEST(Table, ValidationRejectsBadEntries) {
    EXPECT_THROW(FragmentationModel::table({}, {}), Error);
    EXPECT_THROW(FragmentationModel::table({-1.0}, {}), Error);
    EXPECT_THROW(FragmentationModel::table({0.0, 1.0}, {{2, 2, 1.0}}), Error);
    EXPECT_THROW(FragmentationModel::table({0.0, 1.0}, {{1, 3, 1.0}}), Error);
    EXPECT_THROW(FragmentationModel::table({0.0, 1.0}, {{1, 2, -0.5}}), Error);
}

TEST(Table, JsonRoundTrip) {
    const json doc = json::parse(R"({"a": [0, 1, 2], "b": [{"n": 1, "j": 2, "value": 2}, {"n": 1, "j": 3, "value": 3}]})");
    const auto m = FragmentationModel::table_from_json(doc);
    EXPECT_EQ(m.kind(), ModelKind::Table);
    EXPECT_EQ(eval_b(m, 1, 3), 3.0);
    EXPECT_EQ(eval_b(m, 2, 3), 0.0);
    EXPECT_EQ(FragmentationModel::table_from_json(m.table_to_json()), m);
    EXPECT_THROW(FragmentationModel::table_from_json(json::parse(R"({"a": [0], "c": 1})")), Error);
    EXPECT_THROW(FragmentationModel::table_from_json(json::parse(R"({"a": [0, 1], "b": [{"n": 1, "j": 2}]})")), Error);
}

TEST(Table, TabulateAndWithRate) {
    const auto t = FragmentationModel::random_scission().tabulate(8);
    EXPECT_EQ(*t.max_index(), 8u);
    for (Index j = 2; j <= 8; ++j) {
        EXPECT_EQ(t.a(j), static_cast<double>(j - 1));
        for (Index n = 1; n < j; ++n) EXPECT_EQ(t.b(n, j), 2.0 / static_cast<double>(j - 1));
    }
    const auto frozen = t.with_rate(5, 0.0);
    EXPECT_EQ(frozen.a(5), 0.0);
    EXPECT_EQ(frozen.a(6), 5.0);
    EXPECT_THROW(FragmentationModel::random_scission().with_rate(2, 0.0), Error);
}

TEST(Shift, ReducedCoefficients) {
    const auto m = FragmentationModel::random_scission();
    const auto r = m.shifted(1);
    for (Index n = 1; n < 12; ++n) {
        EXPECT_EQ(r.a(n), static_cast<double>(n));
        for (Index j = n + 1; j < 12; ++j) EXPECT_DOUBLE_EQ(r.b(n, j), 2.0 / static_cast<double>(j));
    }
    EXPECT_EQ(r.shifted(1).a(3), m.a(5));
    EXPECT_EQ(m.shifted(2), r.shifted(1));
    EXPECT_EQ(r.unshifted(1), m);
}

TEST(MassBalance, BuiltinsConserve) {
    for (const auto& m : {FragmentationModel::random_scission(), FragmentationModel::binary_chip_off(),
                          FragmentationModel::uniform_binary(0.7)}) {
        const auto r = mass_balance(m, 50);
        EXPECT_TRUE(r.conserving_global) << m.describe();
        for (Index j = 2; j <= 50; ++j) {
            EXPECT_NEAR(r.lambda_at(j), 0.0, 1e-12);
            EXPECT_EQ(r.classification[j - 2], MassClass::Conserving);
        }
    }
}

TEST(MassBalance, PureLossTable) {
    const auto m = FragmentationModel::table(std::vector<double>(10, 1.0), {});
    const auto r = mass_balance(m, 10);
    for (Index j = 2; j <= 10; ++j) {
        EXPECT_EQ(r.lambda_at(j), 1.0);
        EXPECT_EQ(r.classification[j - 2], MassClass::Loss);
    }
    EXPECT_FALSE(r.conserving_global);
    EXPECT_TRUE(r.nonincreasing);
}

TEST(MassBalance, GainAndMonomerLoss) {
    const auto gain = FragmentationModel::table({0.0, 1.0}, {{1, 2, 3.0}});
    const auto r = mass_balance(gain, 2);
    EXPECT_DOUBLE_EQ(r.lambda_at(2), -0.5);
    EXPECT_EQ(r.classification[0], MassClass::Gain);
    EXPECT_FALSE(r.nonincreasing);
    EXPECT_FALSE(mass_balance(FragmentationModel::uniform_binary(1.0, 1.0), 20).conserving_global);
}

TEST(MassBalance, ExactDaughterMassForBuiltins) {
    // sum_{n<j} n b_{n,j} = j for every builtin, checked in rationals.
    for (const auto& m : {FragmentationModel::random_scission(), FragmentationModel::binary_chip_off(),
                          FragmentationModel::uniform_binary(2.0)}) {
        for (Index j = 2; j <= 10000; j = j < 64 ? j + 1 : j * 3 / 2) {
            Rational mass = 0;
            for (Index n = 1; n < j; ++n) {
                const auto b = m.exact_b(n, j);
                ASSERT_TRUE(b.has_value());
                mass += Rational(static_cast<long long>(n)) * *b;
            }
            EXPECT_EQ(mass, Rational(static_cast<long long>(j))) << m.describe() << " j=" << j;
            EXPECT_EQ(*exact_daughter_mass(m, j), mass);
        }
    }
}

TEST(MassBalance, RandomTablesMatchRationalOracle) {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const Index dim = rng.index(2, 12);
        const auto m = oracle::random_table(rng, dim);
        const auto r = mass_balance(m, dim);
        for (Index j = 2; j <= dim; ++j) {
            Rational daughters = 0;
            for (Index n = 1; n < j; ++n) daughters += Rational(static_cast<long long>(n)) * Rational(m.b(n, j));
            const Rational lambda = Rational(1) - daughters / Rational(static_cast<long long>(j));
            EXPECT_NEAR(r.lambda_at(j), lambda.convert_to<double>(), 1e-14);
        }
    }
}

TEST(Property, BVanishesOnAndBelowDiagonal) {
    oracle::Rng rng(3);
    const auto models = {FragmentationModel::random_scission(), FragmentationModel::binary_chip_off(),
                         FragmentationModel::uniform_binary(0.5, 2.0)};
    for (const auto& m : models) {
        for (int k = 0; k < 500; ++k) {
            const Index j = rng.index(2, 400);
            const Index n = rng.index(j, 800);
            EXPECT_EQ(m.b(n, j), 0.0);
        }
    }
}

TEST(CSequence, RunningMaximum) {
    const std::vector<double> a1 = {3, 1, 2};
    EXPECT_EQ(c_sequence(std::span<const double>(a1)), (std::vector<double>{3, 3, 3}));
    const std::vector<double> a2 = {0, 2, 1, 5};
    EXPECT_EQ(c_sequence(std::span<const double>(a2)), (std::vector<double>{0, 2, 2, 5}));
    EXPECT_EQ(c_sequence(FragmentationModel::random_scission(), 4), (std::vector<double>{0, 1, 2, 3}));
}

TEST(CSequence, DominatesAndIsNondecreasing) {
    oracle::Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(rng.index(1, 40));
        for (auto& v : a) v = rng.uniform(0.0, 10.0);
        const auto c = c_sequence(std::span<const double>(a));
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_GE(c[i], a[i]);
            if (i > 0) EXPECT_GE(c[i], c[i - 1]);
        }
    }
}

TEST(DomainDiagnostic, MonotoneAndAlternating) {
    EXPECT_EQ(domain_equality_diagnostic(FragmentationModel::random_scission(), 100).value, 1.0);
    EXPECT_EQ(domain_equality_diagnostic(FragmentationModel::uniform_binary(1.0), 100).value, 1.0);
    std::vector<double> a(100);
    for (Index n = 1; n <= 100; ++n) a[n - 1] = n % 2 == 1 ? static_cast<double>(n) : 0.0;
    const auto d = domain_equality_diagnostic(FragmentationModel::table(a, {}), 100);
    EXPECT_EQ(d.value, 0.0);
    EXPECT_EQ(d.window_first, 51u);
    EXPECT_EQ(d.window_last, 100u);
}
