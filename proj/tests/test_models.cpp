#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "spectf/models.hpp"
#include "spectf/simulation.hpp"

using namespace spectf;
using oracle::random_matrix;
using oracle::random_vector;

namespace {

AdmmConfig tight() {
    AdmmConfig c;
    c.eps_abs = 1e-12;
    c.eps_rel = 1e-12;
    c.max_iter = 200000;
    return c;
}

Matrix empty_z(Eigen::Index n) { return Matrix(n, 0); }

// Bernoulli responses drawn from a mild logit model, so no separation at small n.
Vector bernoulli_draws(const Matrix& X, const Vector& beta, std::mt19937_64& rng) {
    const Vector eta = X * beta;
    Vector y(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        std::bernoulli_distribution coin(1.0 / (1.0 + std::exp(-eta[i])));
        y[i] = coin(rng) ? 1.0 : 0.0;
    }
    return y;
}

} // namespace

TEST(FitGaussian, ZeroPenaltyIsOrdinaryLeastSquares) {
    std::mt19937_64 rng(11);
    const Matrix X = random_matrix(40, 12, rng);
    const Vector y = random_vector(40, rng);
    const TfFit fit = fit_gaussian(X, empty_z(40), y, PenaltySpec::single(2, 0.0));
    const Vector ols = X.colPivHouseholderQr().solve(y);
    EXPECT_LE((fit.f_hat - ols).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(FitGaussian, ZeroSignalGivesZeroFunction) {
    std::mt19937_64 rng(12);
    const Matrix X = random_matrix(30, 15, rng);
    const TfFit fit = fit_gaussian(X, empty_z(30), Vector::Zero(30), PenaltySpec::single(3, 0.5));
    EXPECT_LE(fit.f_hat.lpNorm<Eigen::Infinity>(), 1e-5);
}

TEST(FitGaussian, ConstantResponse) {
    std::mt19937_64 rng(13);
    const Matrix X = random_matrix(20, 10, rng);
    const Vector y = Vector::Constant(20, 3.0);
    EXPECT_THROW(fit_gaussian(X, empty_z(20), y, PenaltySpec::single(2, 1.0)), DataError);
    ModelOptions opts;
    opts.intercept = true;
    const TfFit fit = fit_gaussian(X, empty_z(20), y, PenaltySpec::single(2, 1.0), opts);
    ASSERT_EQ(fit.gamma_hat.size(), 1);
    EXPECT_DOUBLE_EQ(fit.gamma_hat[0], 3.0);
    EXPECT_EQ(fit.f_hat.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(FitGaussian, DimensionMismatch) {
    std::mt19937_64 rng(14);
    const Matrix X = random_matrix(20, 10, rng);
    EXPECT_THROW(fit_gaussian(X, empty_z(20), Vector::Zero(19), PenaltySpec::single(2, 1.0)), DimensionError);
    EXPECT_THROW(fit_gaussian(X, Matrix::Zero(19, 2), Vector::Zero(20), PenaltySpec::single(2, 1.0)), DimensionError);
}

TEST(FitGaussian, PartialModelMatchesReferenceOptimum) {
    std::mt19937_64 rng(15);
    const Matrix X = random_matrix(28, 14, rng);
    const Matrix Z = random_matrix(28, 2, rng);
    const Vector y = random_vector(28, rng);
    ModelOptions opts;
    opts.admm = tight();
    const TfFit fit = fit_gaussian(X, Z, y, PenaltySpec::single(2, 0.7), opts);
    Matrix design(28, 16);
    design << X, Z;
    const auto ref = oracle::trend_filter_reference(design, y, {{2, 0.7}}, 2);
    const double gap = (fit.diagnostics.objective - ref.primal_objective) / std::abs(ref.primal_objective);
    EXPECT_LE(std::abs(gap), 1e-6);
    EXPECT_EQ(fit.gamma_hat.size(), 2);
}

TEST(FitGaussian, ResponseScalingScalesSolution) {
    std::mt19937_64 rng(16);
    const Matrix X = random_matrix(30, 16, rng);
    const Vector y = random_vector(30, rng);
    ModelOptions opts;
    opts.admm = tight();
    const double c = 3.5;
    const TfFit a = fit_gaussian(X, empty_z(30), y, PenaltySpec::single(2, 0.8), opts);
    const TfFit b = fit_gaussian(X, empty_z(30), c * y, PenaltySpec::single(2, c * 0.8), opts);
    EXPECT_LE((b.f_hat - c * a.f_hat).lpNorm<Eigen::Infinity>(), 1e-8 * (1.0 + c * a.f_hat.lpNorm<Eigen::Infinity>()));
}

TEST(FitGaussian, MixedWithZeroSecondLambdaMatchesSingle) {
    std::mt19937_64 rng(17);
    const Matrix X = random_matrix(30, 18, rng);
    const Vector y = random_vector(30, rng);
    ModelOptions opts;
    opts.admm = tight();
    const TfFit single = fit_gaussian(X, empty_z(30), y, PenaltySpec::single(1, 0.6), opts);
    const TfFit mixed = fit_gaussian(X, empty_z(30), y, PenaltySpec::mixed(1, 0.6, 4, 0.0), opts);
    EXPECT_LE((single.f_hat - mixed.f_hat).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(FitGlm, BernoulliMatchesNewtonAtTinyLambda) {
    std::mt19937_64 rng(21);
    const Matrix X = random_matrix(25, 6, rng);
    const Vector y = bernoulli_draws(X, Vector::Constant(6, 0.3), rng);
    ModelOptions opts;
    opts.admm = tight();
    opts.glm_tol = 1e-12;
    const TfFit fit = fit_glm(X, empty_z(25), y, {Family::Bernoulli}, PenaltySpec::single(2, 1e-8), opts);
    const Vector ref = oracle::glm_newton(X, y, true);
    EXPECT_LE((fit.f_hat - ref).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(FitGlm, PoissonMatchesNewtonAtTinyLambda) {
    std::mt19937_64 rng(22);
    const Matrix X = 0.3 * random_matrix(30, 5, rng);
    Vector y(30);
    const Vector eta = X * Vector::Constant(5, 0.4);
    for (Eigen::Index i = 0; i < 30; ++i) {
        std::poisson_distribution<int> pois(std::exp(eta[i]));
        y[i] = pois(rng);
    }
    ModelOptions opts;
    opts.admm = tight();
    opts.glm_tol = 1e-12;
    const TfFit fit = fit_glm(X, empty_z(30), y, {Family::Poisson}, PenaltySpec::single(1, 1e-8), opts);
    const Vector ref = oracle::glm_newton(X, y, false);
    EXPECT_LE((fit.f_hat - ref).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(FitGlm, ObjectiveNeverIncreasesAcrossOuterIterations) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const Matrix X = random_matrix(40, 12, rng);
        const bool bern = seed % 2 == 0;
        Vector y(40);
        if (bern) {
            y = bernoulli_draws(X, random_vector(12, rng), rng);
        } else {
            const Vector eta = 0.3 * X * random_vector(12, rng);
            for (Eigen::Index i = 0; i < 40; ++i) {
                std::poisson_distribution<int> pois(std::exp(std::min(eta[i], 5.0)));
                y[i] = pois(rng);
            }
        }
        const ResponseFamily fam{bern ? Family::Bernoulli : Family::Poisson};
        const TfFit fit = fit_glm(X, empty_z(40), y, fam, PenaltySpec::single(1 + static_cast<int>(seed % 4), 0.5));
        const auto& tr = fit.diagnostics.objective_trace;
        ASSERT_GE(tr.size(), 2u);
        for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1]) << "seed " << seed << " step " << i;
    }
}

TEST(FitGlm, BernoulliNullModelGivesSampleMean) {
    std::mt19937_64 rng(23);
    const Matrix X = Matrix::Zero(50, 8);
    std::bernoulli_distribution coin(0.3);
    Vector y(50);
    for (Eigen::Index i = 0; i < 50; ++i) y[i] = coin(rng) ? 1.0 : 0.0;
    ModelOptions opts;
    opts.intercept = true;
    opts.admm = tight();
    opts.glm_tol = 1e-12;
    const TfFit fit = fit_glm(X, empty_z(50), y, {Family::Bernoulli}, PenaltySpec::single(1, 10.0), opts);
    const Prediction pred = predict(fit, X, empty_z(50));
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_NEAR(pred.mean[i], y.mean(), 1e-6);
}

TEST(FitGlm, RejectsInvalidResponses) {
    std::mt19937_64 rng(24);
    const Matrix X = random_matrix(10, 8, rng);
    Vector y = Vector::Zero(10);
    y[3] = 0.5;
    EXPECT_THROW(fit_glm(X, empty_z(10), y, {Family::Bernoulli}, PenaltySpec::single(1, 1.0)), DataError);
    y[3] = -1.0;
    EXPECT_THROW(fit_glm(X, empty_z(10), y, {Family::Poisson}, PenaltySpec::single(1, 1.0)), DataError);
}

TEST(FitGlm, SeparableDataReportsDivergence) {
    std::mt19937_64 rng(25);
    const Matrix X = random_matrix(30, 8, rng);
    Vector y(30);
    for (Eigen::Index i = 0; i < 30; ++i) y[i] = X(i, 0) > 0 ? 1.0 : 0.0;
    EXPECT_THROW(fit_glm(X, empty_z(30), y, {Family::Bernoulli}, PenaltySpec::single(1, 1e-6)), NumericalError);
}

TEST(Predict, InverseLinks) {
    TfFit fit;
    fit.f_hat = Vector::Zero(3);
    fit.f_hat[0] = 1.0;
    Matrix Xn(2, 3);
    Xn << 0.0, 1.0, 1.0,
          std::log(2.0), 0.0, 0.0;
    fit.family = {Family::Bernoulli};
    Prediction pb = predict(fit, Xn, Matrix(2, 0));
    EXPECT_DOUBLE_EQ(pb.mean[0], 0.5);
    EXPECT_EQ(pb.label[0], 1);
    fit.family = {Family::Poisson};
    Prediction pp = predict(fit, Xn, Matrix(2, 0));
    EXPECT_NEAR(pp.mean[1], 2.0, 1e-14);
    EXPECT_THROW(predict(fit, Matrix::Zero(2, 4), Matrix(2, 0)), DimensionError);
}

TEST(Predict, TrainingDataReproducesFittedValues) {
    std::mt19937_64 rng(26);
    const Matrix X = random_matrix(25, 10, rng);
    const Matrix Z = random_matrix(25, 2, rng);
    const Vector y = random_vector(25, rng);
    ModelOptions opts;
    opts.intercept = true;
    const TfFit fit = fit_gaussian(X, Z, y, PenaltySpec::single(2, 0.3), opts);
    const Prediction pred = predict(fit, X, Z);
    Vector expect = X * fit.f_hat + Z * fit.gamma_hat.tail(2);
    expect.array() += fit.gamma_hat[0];
    EXPECT_LE((pred.mean - expect).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Predict, BernoulliProbabilitiesStayInsideUnitInterval) {
    TfFit fit;
    fit.family = {Family::Bernoulli};
    fit.f_hat = Vector::Constant(2, 1000.0);
    Matrix Xn(2, 2);
    Xn << 1, 1, -1, -1;
    const Prediction pred = predict(fit, Xn, Matrix(2, 0));
    EXPECT_GT(pred.mean[1], 0.0);
    EXPECT_LT(pred.mean[0], 1.0);
}

TEST(SplineBaseline, ZeroLambdaIsOrdinaryLeastSquares) {
    std::mt19937_64 rng(31);
    const Matrix X = random_matrix(40, 12, rng);
    const Vector y = random_vector(40, rng);
    const TfFit fit = fit_spline_baseline(X, empty_z(40), y, 0.0);
    EXPECT_LE((fit.f_hat - X.colPivHouseholderQr().solve(y)).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_EQ(fit.estimator, Estimator::Spline);
}

TEST(SplineBaseline, HugeLambdaGivesBestAffineFit) {
    std::mt19937_64 rng(32);
    const Matrix X = random_matrix(40, 12, rng);
    const Vector y = random_vector(40, rng);
    const TfFit fit = fit_spline_baseline(X, empty_z(40), y, 1e10);
    Matrix affine(12, 2);
    for (Eigen::Index j = 0; j < 12; ++j) affine.row(j) << 1.0, static_cast<double>(j);
    const Vector c = (X * affine).colPivHouseholderQr().solve(y);
    EXPECT_LE((fit.f_hat - affine * c).lpNorm<Eigen::Infinity>(), 1e-4 * (1.0 + c.norm()));
}

TEST(SplineBaseline, BernoulliFitDescends) {
    std::mt19937_64 rng(33);
    const Matrix X = random_matrix(40, 10, rng);
    const Vector y = bernoulli_draws(X, Vector::Constant(10, 0.2), rng);
    const TfFit fit = fit_spline_baseline(X, empty_z(40), y, 1.0, {Family::Bernoulli});
    const auto& tr = fit.diagnostics.objective_trace;
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1]);
    EXPECT_TRUE(fit.diagnostics.converged);
}

TEST(PenaltyGridShape, MixedGridWarmStartsAlongFirstAxis) {
    const PenaltyGrid g = PenaltyGrid::mixed(4, {3.0, 2.0, 1.0}, 1, {5.0, 4.0});
    ASSERT_EQ(g.size(), 6u);
    EXPECT_EQ(g.warm_parent[0], -1);
    EXPECT_EQ(g.warm_parent[1], 0);
    EXPECT_EQ(g.warm_parent[2], 1);
    EXPECT_EQ(g.warm_parent[3], 0);
    EXPECT_DOUBLE_EQ(g.points[4].terms[0].lambda, 2.0);
    EXPECT_DOUBLE_EQ(g.points[4].terms[1].lambda, 4.0);
}

TEST(CrossValidate, SinglePointGrid) {
    std::mt19937_64 rng(41);
    const Matrix X = random_matrix(30, 10, rng);
    const Vector y = random_vector(30, rng);
    const CvReport rep = cross_validate(X, empty_z(30), y, {}, PenaltyGrid::single(2, {0.5}), 5, 9);
    EXPECT_EQ(rep.best_index, 0u);
    ASSERT_EQ(rep.fold_scores.size(), 1u);
    EXPECT_EQ(rep.fold_scores[0].size(), 5u);
    EXPECT_DOUBLE_EQ(rep.best.terms[0].lambda, 0.5);
}

TEST(CrossValidate, TiesGoToStrongerPenalty) {
    const std::vector<PenaltySpec> grid = {PenaltySpec::single(2, 1.0), PenaltySpec::single(2, 5.0),
                                           PenaltySpec::single(2, 0.1)};
    EXPECT_EQ(detail::select_best({0.3, 0.3, 0.3}, grid), 1u);
    EXPECT_EQ(detail::select_best({0.3, 0.4, 0.2}, grid), 2u);
}

TEST(CrossValidate, InvalidArguments) {
    std::mt19937_64 rng(42);
    const Matrix X = random_matrix(20, 10, rng);
    const Vector y = random_vector(20, rng);
    EXPECT_THROW(cross_validate(X, empty_z(20), y, {}, PenaltyGrid::single(2, {1.0}), 1, 0), DataError);
    EXPECT_THROW(cross_validate(X, empty_z(20), y, {}, PenaltyGrid::single(2, {}), 5, 0), DataError);
}

TEST(CrossValidate, StratifiedFoldsKeepBothClasses) {
    Vector y = Vector::Zero(40);
    for (Eigen::Index i = 0; i < 6; ++i) y[i] = 1.0;
    const std::vector<int> folds = assign_folds(y, 5, 3, true);
    std::vector<int> ones(5, 0), zeros(5, 0);
    for (Eigen::Index i = 0; i < 40; ++i) (y[i] == 1.0 ? ones : zeros)[static_cast<std::size_t>(folds[static_cast<std::size_t>(i)])]++;
    for (int k = 0; k < 5; ++k) {
        EXPECT_GE(ones[static_cast<std::size_t>(k)], 1);
        EXPECT_GE(zeros[static_cast<std::size_t>(k)], 1);
    }
    EXPECT_EQ(folds, assign_folds(y, 5, 3, true));
}

TEST(CrossValidate, ResultIndependentOfThreadCount) {
    std::mt19937_64 rng(43);
    const Matrix X = random_matrix(40, 12, rng);
    const Vector y = random_vector(40, rng);
    const PenaltyGrid grid = PenaltyGrid::single(2, geometric_grid(5.0, 8, 1e-3));
    const CvReport a = cross_validate(X, empty_z(40), y, {}, grid, 4, 5, {}, 1);
    const CvReport b = cross_validate(X, empty_z(40), y, {}, grid, 4, 5, {}, 3);
    EXPECT_EQ(a.mean_score, b.mean_score);
    EXPECT_EQ(a.best_index, b.best_index);
}
