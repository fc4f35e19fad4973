#include <cmath>

#include <gtest/gtest.h>

#include "fragkin/weight.hpp"
#include "oracles.hpp"

using namespace fragkin;

TEST(WeightKinds, Evaluation) {
    EXPECT_EQ(power_weight(1)(7), 7.0);
    EXPECT_EQ(power_weight(2)(5), 25.0);
    EXPECT_EQ(geometric_weight(3)(4), 81.0);
    EXPECT_EQ(Weight::dyadic()(1), 1.0);
    EXPECT_EQ(Weight::dyadic()(2), 4.0);
    EXPECT_EQ(Weight::dyadic()(5), 32.0);
    EXPECT_EQ(custom_weight({1, 3, 5})(2), 3.0);
    EXPECT_THROW(custom_weight({1, 3, 5})(4), Error);
    EXPECT_THROW(power_weight(0.5), Error);
    EXPECT_THROW(geometric_weight(1.0), Error);
    EXPECT_THROW(custom_weight({1, 0}), Error);
}

TEST(WeightKinds, ShiftAndScale) {
    const auto w = power_weight(1).shifted(1);
    EXPECT_EQ(w(1), 2.0);
    EXPECT_EQ(w(6), 7.0);
    EXPECT_EQ(w.unshifted(1)(3), 3.0);
    EXPECT_EQ(geometric_weight(2).scaled(3)(2), 12.0);
}

TEST(WeightKinds, Json) {
    EXPECT_EQ(Weight::from_json(json::parse(R"({"kind": "geometric", "r": 4})"))(3), 64.0);
    EXPECT_EQ(Weight::from_json(json::parse("[1, 4, 9]"))(3), 9.0);
    EXPECT_EQ(Weight::from_json(json::parse(R"({"kind": "dyadic"})"))(3), 8.0);
    EXPECT_THROW(Weight::from_json(json::parse(R"({"kind": "power", "p": 1, "q": 2})")), Error);
    EXPECT_THROW(Weight::from_json(json::parse(R"({"kind": "lognormal"})")), Error);
}

TEST(Kappa, ChipOffDyadicIsFiveEighths) {
    // The doubling weight written out as a custom sequence, as in the worked example.
    std::vector<double> values(50);
    values[0] = 1.0;
    for (Index n = 2; n <= 50; ++n) values[n - 1] = std::ldexp(1.0, static_cast<int>(n));
    const auto custom = kappa(FragmentationModel::binary_chip_off(), custom_weight(values), 50);
    EXPECT_EQ(custom.sup_checked, 0.625);
    EXPECT_EQ(custom.argsup, 3u);
    EXPECT_EQ(*custom.exact_sup, Rational(5, 8));

    const auto dyadic = kappa(FragmentationModel::binary_chip_off(), Weight::dyadic(), 50);
    EXPECT_EQ(dyadic.verdict, KappaVerdict::Strict);
    EXPECT_EQ(dyadic.certified_kappa(), 0.625);
    // rho_2 = 1/2, rho_3 = 5/8, rho_j = 1/2 + 2^-j for j >= 4
    EXPECT_EQ(dyadic.rho_at(2), 0.5);
    for (Index j = 4; j <= 50; ++j) EXPECT_EQ(dyadic.rho_at(j), 0.5 + std::ldexp(1.0, -static_cast<int>(j)));
}

TEST(Kappa, GeometricIsTwoOverR) {
    for (double r : {3.0, 4.0, 8.0}) {
        const auto rep = kappa(FragmentationModel::random_scission(), geometric_weight(r), 50);
        EXPECT_DOUBLE_EQ(*rep.analytic_sup, 2.0 / r);
        EXPECT_EQ(rep.verdict, KappaVerdict::Strict);
        EXPECT_LE(rep.sup_checked, 2.0 / r);
    }
}

TEST(Kappa, MassWeightIsWeakWithUnitRatios) {
    const auto rep = kappa(FragmentationModel::random_scission(), power_weight(1), 50);
    for (Index j = 2; j <= 50; ++j) {
        // exact: sum_{n<j} n * 2/(j-1) / j = 1
        EXPECT_EQ(oracle::exact_rho(j, [](Index n) { return Rational(static_cast<long long>(n)); },
                                    [](Index, Index jj) { return Rational(2, static_cast<long long>(jj - 1)); }),
                  Rational(1));
        EXPECT_NEAR(rep.rho_at(j), 1.0, 1e-15);
    }
    EXPECT_EQ(*rep.exact_sup, Rational(1));
    EXPECT_EQ(rep.verdict, KappaVerdict::Weak);
}

TEST(Kappa, UncertifiedFiniteEvidence) {
    const auto rep = kappa(FragmentationModel::random_scission(), power_weight(2), 40);
    EXPECT_FALSE(rep.analytic_sup.has_value());
    EXPECT_LT(rep.sup_checked, 1.0);
    EXPECT_EQ(rep.verdict, KappaVerdict::Weak);
    try {
        (void)rep.certified_kappa();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AssumptionNotCertified);
    }
}

TEST(Kappa, WeightBelowIndexIsRejected) {
    try {
        (void)kappa(FragmentationModel::random_scission(), custom_weight({1, 1.5, 3}), 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WeightBelowIndex);
    }
    KappaOptions lax;
    lax.require_weight_bound = false;
    EXPECT_NO_THROW((void)kappa(FragmentationModel::random_scission(), custom_weight({1, 1.5, 3}), 3, lax));
}

TEST(Kappa, ExhaustiveTableCertificate) {
    const auto m = FragmentationModel::table({0, 1, 1}, {{1, 2, 1.0}, {1, 3, 1.0}, {2, 3, 0.5}});
    const auto rep = kappa(m, custom_weight({1, 4, 9}), 3);
    ASSERT_TRUE(rep.certificate.has_value());
    EXPECT_EQ(rep.certificate->rfind("exhaustive", 0), 0u);
    // rho_2 = 1/4, rho_3 = (1 + 2)/9 = 1/3
    EXPECT_EQ(*rep.exact_sup, Rational(1, 3));
    EXPECT_EQ(rep.verdict, KappaVerdict::Strict);
}

TEST(Kappa, ReducedSystemInheritsCertificate) {
    const auto rep = kappa(FragmentationModel::binary_chip_off().shifted(1), Weight::dyadic().shifted(1), 40);
    EXPECT_EQ(*rep.analytic_sup, 0.625);
    EXPECT_LE(rep.sup_checked, 0.625);
}

TEST(Kappa, ScalingInvariance) {
    oracle::Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const Index dim = rng.index(2, 10);
        const auto m = oracle::random_table(rng, dim);
        const auto w = oracle::random_weight(rng, dim);
        const double factor = rng.uniform(1.0, 50.0);
        std::vector<double> scaled(w);
        for (auto& v : scaled) v *= factor;
        const auto a = kappa(m, custom_weight(w), dim);
        const auto b = kappa(m, custom_weight(scaled), dim);
        for (Index j = 2; j <= dim; ++j) EXPECT_NEAR(a.rho_at(j), b.rho_at(j), 1e-14 * std::max(1.0, a.rho_at(j)));
    }
}

TEST(Kappa, RatioMatchesRationalOracle) {
    oracle::Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const Index dim = rng.index(2, 10);
        const auto m = oracle::random_table(rng, dim);
        const auto w = oracle::random_weight(rng, dim);
        const auto rep = kappa(m, custom_weight(w), dim);
        for (Index j = 2; j <= dim; ++j) {
            const auto rho = oracle::exact_rho(j, [&](Index n) { return Rational(w[n - 1]); },
                                               [&](Index n, Index jj) { return Rational(m.b(n, jj)); });
            EXPECT_NEAR(rep.rho_at(j), rho.convert_to<double>(), 1e-14 * std::max(1.0, rep.rho_at(j)));
        }
    }
}

TEST(ConstructedWeight, NoDaughtersGivesIdentity) {
    const auto w = construct_analytic_weight(FragmentationModel::table(std::vector<double>(20, 1.0), {}), 0.5, 20);
    for (Index n = 1; n <= 20; ++n) EXPECT_EQ(w(n), static_cast<double>(n));
}

TEST(ConstructedWeight, RecheckedByKappa) {
    const std::vector<std::pair<FragmentationModel, double>> cases = {
        {FragmentationModel::random_scission(), 0.5}, {FragmentationModel::binary_chip_off(), 0.625}};
    for (const auto& [model, target] : cases) {
        const auto w = construct_analytic_weight(model, target, 50);
        const auto rep = kappa(model, w, 50);
        EXPECT_LE(rep.sup_checked, target);
        EXPECT_EQ(rep.verdict, KappaVerdict::Strict);
        for (Index n = 1; n <= 50; ++n) EXPECT_GE(w(n), static_cast<double>(n));
    }
}

TEST(ConstructedWeight, RandomTargets) {
    oracle::Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const Index dim = rng.index(2, 12);
        const auto m = oracle::random_table(rng, dim);
        const double target = rng.uniform(0.05, 0.95);
        const auto rep = kappa(m, construct_analytic_weight(m, target, dim), dim);
        EXPECT_LE(rep.sup_checked, target);
        EXPECT_EQ(rep.verdict, KappaVerdict::Strict);
    }
}

TEST(GraphWeight, Formula) {
    const auto w = custom_weight({1, 2, 3});
    const std::vector<double> zero = {0, 0, 0};
    const std::vector<double> c = {1, 2, 2};
    EXPECT_EQ(graph_weight(w, zero).values(3), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(graph_weight(w, c).values(3), (std::vector<double>{2, 6, 9}));
    const auto rs = c_sequence(FragmentationModel::random_scission(), 4);
    EXPECT_EQ(graph_weight(power_weight(1), rs)(4), 16.0);
    const std::vector<double> longer = {0, 0, 0, 0};
    EXPECT_THROW(graph_weight(w, longer), Error);
    const std::vector<double> decreasing = {2, 1, 1};
    EXPECT_THROW(graph_weight(w, decreasing), Error);
}

TEST(GraphWeight, PreservesKappaOnCheckedRange) {
    oracle::Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        const Index dim = rng.index(2, 10);
        const auto m = oracle::random_table(rng, dim);
        const auto w = custom_weight(oracle::random_weight(rng, dim));
        const auto base = kappa(m, w, dim);
        const auto c = c_sequence(m, dim);
        const auto tilde = kappa(m, graph_weight(w, c), dim);
        EXPECT_LE(tilde.sup_checked, base.sup_checked * (1.0 + 1e-14));
    }
}

TEST(RatioCondition, Examples) {
    EXPECT_TRUE(check_ratio_condition(geometric_weight(4), 0.5, 100));
    EXPECT_FALSE(check_ratio_condition(power_weight(1), 0.9, 100));
    EXPECT_FALSE(check_ratio_condition(geometric_weight(2), 2.0 / 3.0, 100));
}

TEST(RatioCondition, ImpliesKappaBound) {
    // Geometric weights pass the ratio condition with delta = max_n (n+1)/(n r)
    // = 2/r; the kappa sup under a mass-nonincreasing model must not exceed delta.
    for (double r : {2.5, 3.0, 5.0}) {
        const double delta = 2.0 / r;
        ASSERT_TRUE(check_ratio_condition(geometric_weight(r), delta, 60));
        for (const auto& m : {FragmentationModel::random_scission(), FragmentationModel::binary_chip_off(),
                              FragmentationModel::uniform_binary(1.0, 1.0)}) {
            EXPECT_LE(kappa(m, geometric_weight(r), 60).sup_checked, delta * (1.0 + 1e-15));
        }
    }
}
