#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "spectf/fused1d.hpp"

using namespace spectf;
using oracle::Vector;

namespace {

int segment_count(const Vector& d, double tol = 1e-9) {
    int count = 1;
    for (Eigen::Index j = 1; j < d.size(); ++j)
        if (std::abs(d[j] - d[j - 1]) > tol) ++count;
    return count;
}

} // namespace

TEST(FusedLasso, ConstantInputIsFixedPoint) {
    const Vector z = Vector::Constant(9, 3.7);
    for (double lam : {0.0, 0.1, 10.0}) EXPECT_LE((fused_lasso_1d(z, lam) - z).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(FusedLasso, ZeroPenaltyIsIdentity) {
    std::mt19937_64 rng(4);
    const Vector z = oracle::random_vector(15, rng);
    EXPECT_EQ(fused_lasso_1d(z, 0.0), z);
}

TEST(FusedLasso, TwoLevelStepShrinks) {
    Vector z(4);
    z << 0, 0, 1, 1;
    Vector expected(4);
    expected << 0.125, 0.125, 0.875, 0.875;
    const Vector d = fused_lasso_1d(z, 0.25);
    EXPECT_LE((d - expected).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE((oracle::fused_lasso(z, 0.25) - expected).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LE(kkt_check(z, 0.25, d), 1e-10);
}

TEST(FusedLasso, DominantPenaltyFusesToMean) {
    std::mt19937_64 rng(5);
    const Vector z = oracle::random_vector(12, rng);
    const double lam = 12 * (z.maxCoeff() - z.minCoeff());
    const Vector d = fused_lasso_1d(z, lam);
    EXPECT_LE((d - Vector::Constant(12, z.mean())).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(FusedLasso, RejectsNonFinite) {
    Vector z = Vector::Zero(4);
    z[2] = std::nan("");
    EXPECT_THROW(fused_lasso_1d(z, 1.0), DataError);
    EXPECT_THROW(fused_lasso_1d(Vector::Zero(3), -1.0), DataError);
}

TEST(FusedLasso, KktCheckTrivialCases) {
    std::mt19937_64 rng(6);
    const Vector z = oracle::random_vector(10, rng);
    EXPECT_EQ(kkt_check(z, 0.0, z), 0.0);
    const Vector c = Vector::Constant(10, -2.0);
    EXPECT_EQ(kkt_check(c, 0.7, c), 0.0);
    // a non-solution is flagged
    EXPECT_GT(kkt_check(z, 0.1, Vector::Zero(10)), 1e-3);
}

TEST(FusedLasso, MatchesDualOracle) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(1, 30);
    for (int inst = 0; inst < 60; ++inst) {
        const Vector z = oracle::random_vector(len(rng), rng);
        for (double lam : {0.01, 0.1, 1.0, 10.0}) {
            const Vector d = fused_lasso_1d(z, lam);
            EXPECT_LE((d - oracle::fused_lasso(z, lam)).lpNorm<Eigen::Infinity>(), 1e-6);
            EXPECT_LE(kkt_check(z, lam, d), 1e-8);
            EXPECT_NEAR(d.mean(), z.mean(), 1e-12);
        }
    }
}

TEST(FusedLasso, SegmentsShrinkAlongLambda) {
    std::mt19937_64 rng(12);
    for (int inst = 0; inst < 20; ++inst) {
        const Vector z = oracle::random_vector(40, rng);
        int previous = 41;
        for (int i = 0; i <= 40; ++i) {
            const double lam = 1e-3 * std::pow(10.0, i / 10.0);
            const int segs = segment_count(fused_lasso_1d(z, lam));
            EXPECT_LE(segs, previous);
            previous = segs;
        }
    }
}

TEST(FusedLasso, SolverReusesBuffers) {
    FusedLassoSolver solver;
    std::mt19937_64 rng(13);
    for (int m : {30, 3, 17, 1, 2}) {
        const Vector z = oracle::random_vector(m, rng);
        EXPECT_LE((solver.solve(z, 0.3) - oracle::fused_lasso(z, 0.3)).lpNorm<Eigen::Infinity>(), 1e-8);
    }
}
