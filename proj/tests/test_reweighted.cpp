#include <gtest/gtest.h>

#include "support.hpp"

#include <cmath>

using namespace sparsectl;
using namespace testing_support;

namespace {

std::shared_ptr<const LowRankSym> empty_lowrank(int N)
{
    auto lr = std::make_shared<LowRankSym>();
    lr->U = Matrix::Zero(N, 0);
    lr->lambda = Vector::Zero(0);
    return lr;
}

Matrix dense_s(const DiscreteOperator& A, const Vector& nu, double alpha, double beta)
{
    Matrix M = dense_gram(A);
    M.diagonal().array() += alpha + beta * nu.array();
    return M.inverse();
}

} // namespace

TEST(WeightField, RejectsNonPositive)
{
    EXPECT_THROW(WeightField((Vector(2) << 1.0, 0.0).finished(), 1e-3), DomainError);
    EXPECT_NO_THROW(WeightField(Vector::Ones(3), 1e-3));
}

TEST(Snu, EmptyBasisIsDiagonal)
{
    const Vector nu = random_positive(9, 1), v = random_vector(9, 2);
    const SnuOperator S(empty_lowrank(9), nu, 1e-2, 0.5);
    const Vector d = (1e-2 + 0.5 * nu.array()).matrix();
    EXPECT_LT(rel(S.apply(v), v.cwiseQuotient(d)), 1e-15);
    EXPECT_LT(rel(S.diag(), d.cwiseInverse()), 1e-15);
}

TEST(Snu, ConstantWeightDiagonalizes)
{
    const DiscreteOperator A(Grid2D(6), BoundarySpec::neumann_left(), OperatorKind::laplace);
    const auto lr = full_rank(A);
    const double alpha = 1e-5, beta = 1e-3, c = 2.0;
    const SnuOperator S(lr, Vector::Constant(36, c), alpha, beta);
    for (int i : {0, 5, 20}) {
        const Vector u = lr->U.col(i);
        EXPECT_LT(rel(S.apply(u), u / (lr->lambda(i) + alpha + beta * c)), 1e-10);
    }
}

TEST(Snu, DenseInverseOracleFullRank)
{
    for (int n : {2, 8}) {
        const DiscreteOperator A(Grid2D(n), BoundarySpec::neumann_left(), OperatorKind::helmholtz, n == 2 ? 1.0 : 12.0);
        const auto lr = full_rank(A);
        const Vector nu = random_positive(n * n, 3, 0.1, 10.0);
        const double alpha = 5e-5, beta = 5e-4;
        const SnuOperator S(lr, nu, alpha, beta);
        const Matrix oracle = dense_s(A, nu, alpha, beta);
        const Matrix applied = S.apply(Matrix(Matrix::Identity(n * n, n * n)));
        EXPECT_LE(max_abs(applied - oracle), 1e-9 * max_abs(oracle)) << "n=" << n;
        EXPECT_LE((S.diag() - oracle.diagonal()).cwiseAbs().maxCoeff(), 1e-9 * max_abs(oracle)) << "n=" << n;
    }
}

TEST(Snu, ApplyIsLinearSymmetricAndInvertsForward)
{
    const DiscreteOperator A(Grid2D(10), BoundarySpec::neumann_left(), OperatorKind::laplace);
    const auto lr = std::make_shared<const LowRankSym>(eig_lowrank(solution_operator_gram(A), 100, 30));
    const Vector nu = random_positive(100, 4, 0.01, 100.0);
    const SnuOperator S(lr, nu, 1e-5, 1e-3);
    const Vector v = random_vector(100, 5), w = random_vector(100, 6);
    EXPECT_EQ(S.apply(Vector(Vector::Zero(100))).norm(), 0.0);
    EXPECT_LT(rel(S.apply(Vector(3.0 * v - w)), Vector(3.0 * S.apply(v) - S.apply(w))), 1e-12);
    const double a = S.apply(v).dot(w), b = v.dot(S.apply(w));
    EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
    EXPECT_LT(rel(S.forward(S.apply(v)), v), 1e-10);
}

TEST(Snu, DiagonalColumnProbes)
{
    const DiscreteOperator A(Grid2D(12), BoundarySpec::neumann_left(), OperatorKind::helmholtz, 12.0);
    const auto lr = std::make_shared<const LowRankSym>(eig_lowrank(solution_operator_gram(A), 144, 40));
    const Vector nu = random_positive(144, 7, 0.1, 1e4);
    const SnuOperator S(lr, nu, 5e-5, 5e-4);
    const Vector diag = S.diag();
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, 143);
    for (int k = 0; k < 10; ++k) {
        const int j = pick(rng);
        Vector e = Vector::Zero(144);
        e(j) = 1.0;
        EXPECT_NEAR(S.apply(e)(j), diag(j), 1e-10 * std::abs(diag(j)));
    }
    // S is dominated by D^{-1}.
    EXPECT_TRUE(((diag.array() <= S.d_nu().array().inverse() * (1.0 + 1e-14))).all());
}

TEST(Snu, ShrinksWithBeta)
{
    const DiscreteOperator A(Grid2D(6), BoundarySpec::neumann_left(), OperatorKind::laplace);
    const auto lr = full_rank(A);
    const Vector nu = random_positive(36, 9), v = random_vector(36, 10);
    double prev = std::numeric_limits<double>::infinity();
    for (double beta : {0.0, 1e-4, 1e-3, 1e-2}) {
        const double norm = SnuOperator(lr, nu, 1e-5, beta).apply(v).norm();
        EXPECT_LT(norm, prev);
        prev = norm;
    }
}

TEST(Snu, RejectsInvalidInputs)
{
    const auto lr = empty_lowrank(4);
    EXPECT_THROW(SnuOperator(lr, (Vector(4) << 1, 1, -1, 1).finished(), 1e-5, 1e-3), DomainError);
    EXPECT_THROW(SnuOperator(lr, Vector::Ones(4), 0.0, 1e-3), DomainError);
    EXPECT_THROW(SnuOperator(lr, Vector::Ones(3), 1e-5, 1e-3), DimensionError);
}

TEST(SecondMoment, ZeroAndSingleMode)
{
    const DiscreteOperator A(Grid2D(4), BoundarySpec::neumann_left(), OperatorKind::laplace);
    const auto lr = full_rank(A);
    const SnuOperator S(lr, random_positive(16, 1), 1e-5, 1e-3);
    ForcingBasis fb;
    fb.e0 = Vector::Zero(16);
    fb.E = Matrix::Zero(16, 3);
    EXPECT_EQ(second_moment(S, fb).s.norm(), 0.0);
    fb.e0 = random_vector(16, 2);
    fb.E = Matrix::Zero(16, 0);
    const auto m = second_moment(S, fb);
    EXPECT_LT(rel(m.s, S.apply(fb.e0).cwiseAbs2()), 1e-14);
}

TEST(SecondMoment, MonteCarloOverModeRepresentation)
{
    const auto spec = small_spec(ProblemKind::poisson_neumann, 8);
    const auto prob = build_problem(spec);
    const auto setup = offline_setup(prob, 64, 8);
    const Vector nu = random_positive(64, 3, 0.5, 50.0);
    const SnuOperator S(setup.lowrank, nu, spec.alpha, spec.beta);
    const auto m = second_moment(S, *setup.basis);

    const int draws = 100000;
    const int rt = setup.basis->rank();
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal;
    Vector mean_sq = Vector::Zero(64), mean_4 = Vector::Zero(64);
    for (int k = 0; k < draws; ++k) {
        Vector u = m.modes.col(0);
        for (int i = 0; i < rt; ++i) u -= m.modes.col(i + 1) * normal(rng);
        const Vector sq = u.cwiseAbs2();
        mean_sq += sq;
        mean_4 += sq.cwiseAbs2();
    }
    mean_sq /= draws;
    mean_4 /= draws;
    for (int j = 0; j < 64; ++j) {
        const double se = std::sqrt(std::max(mean_4(j) - mean_sq(j) * mean_sq(j), 0.0) / draws);
        EXPECT_LE(std::abs(mean_sq(j) - m.s(j)), 3.0 * se + 1e-14) << "cell " << j;
    }
}
