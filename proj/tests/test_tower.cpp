#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fragkin/tower.hpp"
#include "oracles.hpp"

using namespace fragkin;

namespace {

std::vector<double> basis(Index n, Index dim) {
    std::vector<double> e(dim, 0.0);
    e[n - 1] = 1.0;
    return e;
}

} // namespace

TEST(SobolevNorm, OrderZeroIsWeightedNorm) {
    const TowerContext ctx(FragmentationModel::random_scission(), geometric_weight(3), 12);
    const std::vector<double> f = {1, 0, 2, 0, 0, 0.5, 0, 0, 0, 0, 0, 1};
    EXPECT_EQ(sobolev_norm(ctx, f, 0), weighted_norm(f, geometric_weight(3)));
}

TEST(SobolevNorm, MonomerIsEigenvector) {
    for (double mu : {0.5, 1.0, 2.0}) {
        const TowerContext ctx(FragmentationModel::random_scission(), power_weight(1), 8, mu);
        const auto e1 = basis(1, 8);
        for (int k = -4; k <= 4; ++k) EXPECT_NEAR(sobolev_norm(ctx, e1, k), std::pow(mu, k), 1e-14 * std::pow(mu, k));
    }
}

TEST(SobolevNorm, OrderLimit) {
    const TowerContext ctx(FragmentationModel::random_scission(), power_weight(1), 4);
    const auto e1 = basis(1, 4);
    EXPECT_NO_THROW(sobolev_norm(ctx, e1, kMaxTowerOrder));
    EXPECT_NO_THROW(sobolev_norm(ctx, e1, -kMaxTowerOrder));
    try {
        (void)sobolev_norm(ctx, e1, 9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidParameter);
    }
    EXPECT_THROW(sobolev_norm(ctx, e1, -9), Error);
    EXPECT_THROW(TowerContext(FragmentationModel::random_scission(), power_weight(1), 4, 0.0), Error);
}

TEST(TowerApply, MatchesDenseSolve) {
    oracle::Rng rng(71);
    for (int trial = 0; trial < 60; ++trial) {
        const Index dim = rng.index(2, 9);
        const auto m = oracle::random_table(rng, dim);
        const auto w = custom_weight(oracle::random_weight(rng, dim));
        const double mu = rng.uniform(0.5, 3.0);
        const TowerContext ctx(m, w, dim, mu);
        std::vector<double> f(dim);
        for (auto& v : f) v = rng.uniform(-1.0, 1.0);

        const auto d = static_cast<Eigen::Index>(dim);
        const Eigen::MatrixXd shifted = oracle::dense_generator(m, dim) - mu * Eigen::MatrixXd::Identity(d, d);
        const Eigen::VectorXd fv = Eigen::Map<const Eigen::VectorXd>(f.data(), d);
        const Eigen::VectorXd up = shifted * (shifted * fv);
        const Eigen::VectorXd down = shifted.partialPivLu().solve(shifted.partialPivLu().solve(fv));

        const auto x_up = tower_apply(ctx, f, 2);
        const auto x_down = tower_apply(ctx, f, -2);
        for (Index i = 0; i < dim; ++i) {
            const auto e = static_cast<Eigen::Index>(i);
            EXPECT_NEAR(x_up[i], up(e), 1e-12 * std::max(1.0, up.cwiseAbs().maxCoeff()));
            EXPECT_NEAR(x_down[i], down(e), 1e-10 * std::max(1.0, down.cwiseAbs().maxCoeff()));
        }
        const auto round_trip = tower_apply(ctx, tower_apply(ctx, f, -1), 1);
        for (Index i = 0; i < dim; ++i) EXPECT_NEAR(round_trip[i], f[i], 1e-10);
    }
}

TEST(Resolvent, ContractionForMassWeight) {
    // ||(mu - G)^{-1}||_w <= 1/mu whenever the semigroup is a contraction
    for (double mu : {0.25, 1.0, 4.0}) {
        const TowerContext rs(FragmentationModel::random_scission(), power_weight(1), 64, mu);
        EXPECT_LE(inverse_operator_norm(rs), (1.0 / mu) * (1.0 + 1e-12));
        const TowerContext chip(FragmentationModel::binary_chip_off(), Weight::dyadic(), 40, mu);
        EXPECT_LE(inverse_operator_norm(chip), (1.0 / mu) * (1.0 + 1e-12));
    }
    // a_1 = 0 makes e_1 a fixed point, so the bound is attained
    const TowerContext rs(FragmentationModel::random_scission(), power_weight(1), 16, 2.0);
    EXPECT_NEAR(inverse_operator_norm(rs), 0.5, 1e-14);
}

TEST(Resolvent, SolveResidualIsTiny) {
    oracle::Rng rng(83);
    for (double mu : {0.1, 1.0, 10.0}) {
        const TowerContext ctx(FragmentationModel::random_scission(), geometric_weight(3), 64, mu);
        std::vector<double> f(64);
        for (auto& v : f) v = rng.uniform(0.0, 1.0);
        const auto x = ctx.solve_shifted(f);
        EXPECT_LE(ctx.solve_residual(x, f), 1e-10);
    }
}

TEST(Embedding, ChainOfNorms) {
    oracle::Rng rng(73);
    const TowerContext ctx(FragmentationModel::random_scission(), geometric_weight(3), 32);
    const double c = inverse_operator_norm(ctx);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> f(32);
        for (auto& v : f) v = rng.coin(0.5) ? 0.0 : rng.uniform(-1.0, 1.0);
        for (int k = -3; k <= 2; ++k) {
            // ||f||_{k} <= C ||f||_{k+1}
            EXPECT_LE(sobolev_norm(ctx, f, k), c * sobolev_norm(ctx, f, k + 1) * (1.0 + 1e-10) + 1e-300);
        }
    }
}

TEST(Embedding, Telescoping) {
    // ||f||_{k+1} is the order-k norm of (G_N - mu) f
    const TowerContext ctx(FragmentationModel::binary_chip_off(), Weight::dyadic(), 20, 1.5);
    std::vector<double> f(20);
    for (Index n = 1; n <= 20; ++n) f[n - 1] = 1.0 / static_cast<double>(n * n);
    const auto gf = ctx.apply_shifted(f);
    for (int k = -3; k <= 3; ++k) {
        const double lhs = sobolev_norm(ctx, f, k + 1);
        EXPECT_NEAR(lhs, sobolev_norm(ctx, gf, k), 1e-10 * lhs);
    }
}

TEST(Eigenpair, EntriesAndTail) {
    const auto pair = eigenpair(1.0, 100);
    EXPECT_DOUBLE_EQ(pair.g[0], 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(pair.g[1], 1.0 / 24.0);
    EXPECT_DOUBLE_EQ(pair.tail(1), 1.0 / 12.0);
    // numeric oracle for the telescoping tail
    for (Index n : {1, 10, 50}) {
        double sum = 0.0;
        for (Index j = 1'000'000; j > n; --j) sum += EigenPair::entry(1.0, j);
        EXPECT_NEAR(pair.tail(n), sum, 1e-12);
    }
    EXPECT_THROW(eigenpair(0.0, 10), Error);
    EXPECT_THROW(eigenpair(-1.0, 10), Error);
}

TEST(Eigenpair, ResidualWithAndWithoutTail) {
    const auto pair = eigenpair(1.0, 100);
    EXPECT_LE(eigen_residual(pair, 100), 1e-14);
    EXPECT_GE(eigen_residual(pair, 100, false), 1e-5);
    EXPECT_THROW(eigen_residual(pair, 101), Error);
}

TEST(Eigenpair, RandomLambdas) {
    oracle::Rng rng(79);
    for (int trial = 0; trial < 100; ++trial) {
        const double lambda = rng.uniform(0.01, 10.0);
        const auto pair = eigenpair(lambda, 200);
        EXPECT_LE(eigen_residual(pair, 200), 1e-12 * pair.g[0]) << "lambda " << lambda;
        for (Index n = 1; n <= 200; ++n) EXPECT_GT(pair.g[n - 1], 0.0);
    }
}

TEST(DomainG1, FinitelySupportedVanishes) {
    for (Index m : {1, 5, 40}) {
        const auto report = domain_G1_check(std::span<const double>(basis(m, 40)), 100);
        EXPECT_EQ(report.diagnostic[99], 0.0);
        EXPECT_EQ(report.limit_estimate, 0.0);
    }
}

TEST(DomainG1, EigenvectorTailLimit) {
    const auto pair = eigenpair(1.0, 100);
    const auto at100 = domain_G1_check(pair, 100);
    EXPECT_NEAR(at100.diagnostic[99], 10000.0 / (2.0 * 101.0 * 102.0), 1e-14);
    EXPECT_NEAR(at100.diagnostic[99], 0.4853, 1e-4);
    EXPECT_EQ(at100.window_first, 51u);
    const auto far = domain_G1_check(pair, 1000);
    EXPECT_NEAR(far.limit_estimate, 0.5, 0.01);
    const auto five = domain_G1_check(eigenpair(5.0, 10), 1000);
    EXPECT_NEAR(five.limit_estimate, 0.5, 0.01);
    EXPECT_GT(five.limit_estimate, 0.0);
}

TEST(DomainG1, InfiniteSupportNeedsTail) {
    try {
        (void)domain_G1_check(TailSequence{{1.0, 0.5}, true, {}}, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TailUnavailable);
    }
}

TEST(Smoothing, StationaryMonomer) {
    const TowerContext ctx(FragmentationModel::random_scission(), power_weight(1), 8, 2.0);
    const auto rows = smoothing_demo(ctx, StateVector::basis(1, power_weight(1)), {0.0, 1.0, 5.0});
    ASSERT_EQ(rows.size(), 15u);
    for (const auto& r : rows) EXPECT_NEAR(r.norm, std::pow(2.0, r.order), 1e-12);
}

TEST(Smoothing, NormsDoNotGrow) {
    const auto w = power_weight(1);
    const TowerContext ctx(FragmentationModel::random_scission(), w, 256);
    const auto f = StateVector::basis(256, w);
    const auto rows = smoothing_demo(ctx, f, {0.0, 0.05, 0.5});
    ASSERT_EQ(rows.size(), 15u);
    for (int k = 0; k < 5; ++k) {
        EXPECT_EQ(rows[k].t, 0.0);
        EXPECT_EQ(rows[k].norm, sobolev_norm(ctx, f, rows[k].order));
    }
    for (std::size_t i = 5; i < rows.size(); ++i) {
        EXPECT_TRUE(std::isfinite(rows[i].norm));
        EXPECT_LE(rows[i].norm, rows[i % 5].norm * (1.0 + 1e-6));
    }
    // the positive orders fall sharply once the large fragment has broken up
    EXPECT_LT(rows[14].norm, 1e-2 * rows[4].norm);
}

TEST(Smoothing, CsvLayout) {
    std::ostringstream out;
    write_tower_csv(out, {{0.0, -1, 0.5}, {1.0, 2, 3.0}});
    EXPECT_EQ(out.str(), "t,order,norm\n0,-1,0.5\n1,2,3\n");
}

TEST(Nonuniqueness, CoincideAtTimeZero) {
    const auto r = nonuniqueness_demo(1.0, 0.0, 200);
    EXPECT_LE(r.norm_gap, 1e-6);
    EXPECT_LE(r.residual_a, 1e-10);
}

TEST(Nonuniqueness, SolutionsSeparate) {
    const auto r = nonuniqueness_demo(1.0, 1.0, 200);
    EXPECT_LE(r.residual_a, 1e-6);
    EXPECT_LE(r.residual_b, 1e-6);
    // the exponential solution grows by e, the semigroup orbit cannot gain mass
    EXPECT_NEAR(r.sol_a_norm, std::exp(1.0) * r.g_norm, 1e-12);
    EXPECT_LE(r.sol_b_norm, r.g_norm * (1.0 + 1e-7));
    EXPECT_GE(r.norm_gap, (std::exp(1.0) - 1.0) * r.g_norm * (1.0 - 1e-7));
    EXPECT_GT(r.margin(), 1.5);
    const auto doc = r.to_json();
    EXPECT_TRUE(doc.contains("norm_gap"));
}
