#include <gtest/gtest.h>

#include "support.hpp"

#include <cmath>

using namespace sparsectl;
using namespace testing_support;

namespace {

Matrix dense_sqrt(const Matrix& M)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Nodal covariance of the boundary prior: (gamma / h) T^{-1}, T the 1-D Dirichlet operator.
Matrix boundary_covariance(int n, double gamma)
{
    const Matrix T = fd1d_matrix(n, Condition::dirichlet, Condition::dirichlet);
    return (gamma * n) * T.inverse();
}

} // namespace

TEST(Prior, ZeroInputAndDimensions)
{
    const auto b = GaussianPrior::boundary1d(5, 4.0);
    const auto d = GaussianPrior::domain2d(Grid2D(4), 400.0);
    EXPECT_EQ(b.dimension(), 5);
    EXPECT_EQ(d.dimension(), 16);
    EXPECT_EQ(b.cov_sqrt_apply(Vector(Vector::Zero(5))).norm(), 0.0);
    EXPECT_EQ(d.cov_sqrt_apply(Vector(Vector::Zero(16))).norm(), 0.0);
    EXPECT_THROW((void)b.cov_sqrt_apply(Vector(Vector::Zero(4))), DimensionError);
    EXPECT_THROW((void)GaussianPrior::boundary1d(5, 0.0), DomainError);
}

TEST(Prior, BoundarySquareRootMatchesDenseOracle)
{
    const int n = 3;
    const double gamma = 4.0;
    const auto prior = GaussianPrior::boundary1d(n, gamma);
    const Matrix oracle = dense_sqrt(boundary_covariance(n, gamma));
    EXPECT_LT(max_abs(dense_cov_sqrt(prior) - oracle), 1e-12 * max_abs(oracle));
}

TEST(Prior, SingleCellSegment)
{
    // 1x1 operator [4/h^2] with h = 1: trace gamma / 4.
    const auto prior = GaussianPrior::boundary1d(1, 3.0);
    EXPECT_NEAR(prior.trace(), 3.0 / 4.0, 1e-15);
}

TEST(Prior, TraceAgainstDenseEigenvalues)
{
    const auto prior = GaussianPrior::boundary1d(2, 4.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(fd1d_matrix(2, Condition::dirichlet, Condition::dirichlet));
    EXPECT_NEAR(prior.trace(), 4.0 * (1.0 / es.eigenvalues()(0) + 1.0 / es.eigenvalues()(1)), 1e-14);
    EXPECT_NEAR(GaussianPrior::boundary1d(9, 8.0).trace(), 2.0 * GaussianPrior::boundary1d(9, 4.0).trace(), 1e-13);
    EXPECT_THROW((void)GaussianPrior::domain2d(Grid2D(3), 1.0).trace(), NotImplementedError);
}

TEST(Prior, DomainSquareOfSquareRoot)
{
    const Grid2D g(6);
    const double gamma = 400.0;
    const auto prior = GaussianPrior::domain2d(g, gamma);
    const DiscreteOperator L(g, BoundarySpec::dirichlet_right_only(), OperatorKind::laplace);
    const Vector xi = random_vector(g.N, 11);
    const Vector twice = prior.cov_sqrt_apply(prior.cov_sqrt_apply(xi));
    // Nodal covariance gamma L^{-2} / h^2 (white noise of variance 1/h^2 per cell).
    const Vector expected = (gamma / (g.h * g.h)) * L.solve(L.solve(xi));
    EXPECT_LT(rel(twice, expected), 1e-12);
}

TEST(Prior, LinearAndSelfAdjoint)
{
    for (const auto& prior : {GaussianPrior::boundary1d(12, 4.0), GaussianPrior::domain2d(Grid2D(5), 400.0)}) {
        const int p = prior.dimension();
        const Vector x = random_vector(p, 1), z = random_vector(p, 2);
        const Vector lin = prior.cov_sqrt_apply(Vector(2.0 * x - 3.0 * z));
        const Vector parts = 2.0 * prior.cov_sqrt_apply(x) - 3.0 * prior.cov_sqrt_apply(z);
        EXPECT_LT(rel(lin, parts), 1e-12);
        const double a = prior.cov_sqrt_apply(x).dot(z), b = x.dot(prior.cov_sqrt_apply(z));
        EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
        // Matrix and vector paths agree.
        EXPECT_LT(rel(Vector(prior.cov_sqrt_apply(Matrix(x)).col(0)), prior.cov_sqrt_apply(x)), 1e-14);
    }
}

TEST(Prior, SamplingDeterminismAndMean)
{
    const Vector mean = Vector::LinSpaced(8, -1.0, 1.0);
    const auto prior = GaussianPrior::boundary1d(8, 4.0, mean);
    const Vector a = prior.sample(42), b = prior.sample(42);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, prior.sample(43));
    const auto tiny = GaussianPrior::boundary1d(8, 1e-30, mean);
    EXPECT_LT((tiny.sample(7) - mean).norm(), 1e-12);
}

TEST(Prior, MidpointVarianceMatchesCovarianceDiagonal)
{
    const int n = 15;
    const double gamma = 4.0;
    const auto prior = GaussianPrior::boundary1d(n, gamma);
    const int mid = n / 2;
    const int draws = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double v = prior.sample(1000 + static_cast<std::uint64_t>(k))(mid);
        sum += v;
        sum2 += v * v;
    }
    const double var = sum2 / draws - (sum / draws) * (sum / draws);
    const double expected = boundary_covariance(n, gamma)(mid, mid);
    EXPECT_NEAR(var / expected, 1.0, 0.05);
    // The diagonal approximates the Green's function gamma s (1 - s) at the midpoint.
    EXPECT_NEAR(expected, gamma * 0.25, 0.02 * gamma);
}

TEST(Prior, VarianceVanishesTowardEndpoints)
{
    const int n = 20;
    const Matrix C = boundary_covariance(n, 4.0);
    EXPECT_LT(C(0, 0), C(1, 1));
    EXPECT_LT(C(1, 1), C(2, 2));
    EXPECT_LT(C(n - 1, n - 1), C(n - 2, n - 2));
    EXPECT_LT(C(n - 2, n - 2), C(n - 3, n - 3));
    EXPECT_LT(C(0, 0), 0.1 * C(n / 2, n / 2));
}
