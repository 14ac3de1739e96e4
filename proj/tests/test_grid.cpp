#include <gtest/gtest.h>

#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace sparsectl;
using namespace testing_support;

namespace {

std::vector<double> sorted_eigenvalues(const Matrix& M)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST(Grid2D, GeometryAndIndexing)
{
    const Grid2D g(8);
    EXPECT_EQ(g.N, 64);
    EXPECT_NEAR(g.h * g.n, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(g.x(0), 1.0 / 16.0);
    EXPECT_EQ(g.index(3, 2), 2 * 8 + 3);
    EXPECT_THROW(Grid2D(1), DomainError);
}

TEST(Assemble, TwoByTwoDirichletMatrix)
{
    const DiscreteOperator A(Grid2D(2), BoundarySpec::all_dirichlet(), OperatorKind::laplace);
    const Matrix M = dense(A);
    for (int i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(M(i, i), 24.0);
        int off = 0;
        for (int j = 0; j < 4; ++j) {
            if (j != i && M(i, j) != 0.0) {
                EXPECT_DOUBLE_EQ(M(i, j), -4.0);
                ++off;
            }
        }
        EXPECT_EQ(off, 2);
    }
    const auto ev = sorted_eigenvalues(M);
    EXPECT_NEAR(ev[0], 16.0, 1e-12);
    EXPECT_NEAR(ev[1], 24.0, 1e-12);
    EXPECT_NEAR(ev[2], 24.0, 1e-12);
    EXPECT_NEAR(ev[3], 32.0, 1e-12);
}

TEST(Assemble, HelmholtzShiftsSpectrum)
{
    const DiscreteOperator A(Grid2D(2), BoundarySpec::all_dirichlet(), OperatorKind::helmholtz, 1.0);
    const auto ev = sorted_eigenvalues(dense(A));
    const double expected[] = {15.0, 23.0, 23.0, 31.0};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(ev[static_cast<std::size_t>(i)], expected[i], 1e-12);
}

TEST(Assemble, InteriorStencil)
{
    const Grid2D g(6);
    const DiscreteOperator A(g, BoundarySpec::neumann_left(), OperatorKind::laplace);
    const Matrix M = dense(A);
    const int c = g.index(2, 3);
    const double s = 1.0 / (g.h * g.h);
    EXPECT_NEAR(M(c, c), 4.0 * s, 1e-9);
    for (int nb : {g.index(1, 3), g.index(3, 3), g.index(2, 2), g.index(2, 4)}) EXPECT_NEAR(M(c, nb), -s, 1e-9);
    EXPECT_NEAR(M.row(c).sum(), 0.0, 1e-9);
}

TEST(Assemble, NeumannFaceDropsNeighbour)
{
    const Grid2D g(4);
    const DiscreteOperator A(g, BoundarySpec::neumann_left(), OperatorKind::laplace);
    const Matrix M = dense(A);
    const double s = 1.0 / (g.h * g.h);
    // Left face Neumann, other faces interior: diagonal 3/h^2.
    EXPECT_NEAR(M(g.index(0, 1), g.index(0, 1)), 3.0 * s, 1e-9);
    // Bottom-left corner: Neumann left, Dirichlet bottom.
    EXPECT_NEAR(M(g.index(0, 0), g.index(0, 0)), 4.0 * s, 1e-9);
}

TEST(Assemble, SymmetricForAllConfigurations)
{
    for (const auto& bc : {BoundarySpec::all_dirichlet(), BoundarySpec::neumann_left(),
                           BoundarySpec::dirichlet_right_only()}) {
        const DiscreteOperator A(Grid2D(5), bc, OperatorKind::laplace);
        const Matrix M = dense(A);
        EXPECT_EQ((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Assemble, ClosedFormDirichletSpectrum)
{
    for (int n : {3, 8, 16}) {
        const Grid2D g(n);
        const DiscreteOperator A(g, BoundarySpec::all_dirichlet(), OperatorKind::laplace);
        std::vector<double> closed;
        for (int j = 1; j <= n; ++j) {
            for (int k = 1; k <= n; ++k) {
                const double a = std::sin(j * M_PI / (2.0 * n));
                const double b = std::sin(k * M_PI / (2.0 * n));
                closed.push_back(4.0 / (g.h * g.h) * (a * a + b * b));
            }
        }
        std::sort(closed.begin(), closed.end());
        const auto ev = sorted_eigenvalues(dense(A));
        for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i] / closed[i], 1.0, 1e-8);
    }
}

TEST(Assemble, SeparableSpectrumMatchesDense)
{
    const Grid2D g(6);
    for (const auto& bc : {BoundarySpec::neumann_left(), BoundarySpec::dirichlet_right_only()}) {
        const DiscreteOperator A(g, bc, OperatorKind::helmholtz, 3.0);
        Vector mu = A.spectrum().eigenvalues();
        std::vector<double> sep(mu.data(), mu.data() + mu.size());
        std::sort(sep.begin(), sep.end());
        const auto ev = sorted_eigenvalues(dense(A));
        for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(sep[i], ev[i], 1e-8 * std::abs(ev.back()));
    }
}

TEST(Assemble, SingularHelmholtzRejected)
{
    // kappa^2 = 16 hits the lowest all-Dirichlet eigenvalue on the 2x2 grid.
    EXPECT_THROW(DiscreteOperator(Grid2D(2), BoundarySpec::all_dirichlet(), OperatorKind::helmholtz, 4.0),
                 SingularOperatorError);
    // Pure Neumann Laplacian is singular.
    BoundarySpec bc;
    bc.sides.fill(Condition::neumann);
    EXPECT_THROW(DiscreteOperator(Grid2D(4), bc, OperatorKind::laplace), SingularOperatorError);
}

TEST(Solve, ZeroAndUnitVectors)
{
    const DiscreteOperator A(Grid2D(7), BoundarySpec::neumann_left(), OperatorKind::helmholtz, 12.0);
    EXPECT_EQ(A.solve(Vector(Vector::Zero(A.size()))).norm(), 0.0);
    for (int j : {0, 10, 48}) {
        Vector e = Vector::Zero(A.size());
        e(j) = 1.0;
        EXPECT_LT((A.solve(A.apply(e)) - e).norm(), 1e-10);
    }
}

TEST(Solve, DenseInverseOracle)
{
    const DiscreteOperator A(Grid2D(2), BoundarySpec::all_dirichlet(), OperatorKind::laplace);
    const Vector ones = Vector::Ones(4);
    const Vector expected = dense(A).inverse() * ones;
    EXPECT_LT(rel(A.solve(ones), expected), 1e-12);
    // By symmetry every entry equals 1/16 (constant vector is the lowest eigenvector).
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(expected(i), 1.0 / 16.0, 1e-14);
}

TEST(Solve, ResidualAndRoundTrip)
{
    const DiscreteOperator A(Grid2D(16), BoundarySpec::neumann_left(), OperatorKind::helmholtz, 12.0);
    const Vector b = random_vector(A.size(), 3);
    const Vector x = A.solve(b);
    EXPECT_LE((A.apply(x) - b).norm(), 1e-10 * b.norm());
    EXPECT_LT(rel(A.solve(A.apply(b)), b), 1e-10);
}

TEST(Solve, SelfAdjointInDiscreteInnerProduct)
{
    const Grid2D g(9);
    const DiscreteOperator A(g, BoundarySpec::neumann_left(), OperatorKind::laplace);
    const Vector v = random_vector(g.N, 1), w = random_vector(g.N, 2);
    const double a = inner_l2(g, A.apply(v), w), b = inner_l2(g, v, A.apply(w));
    EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
}

TEST(Injection, BoundaryWeightsAndZero)
{
    const Grid2D g(2);
    const Vector field = boundary_injection(g, BoundarySpec::neumann_left(), Vector::Ones(2));
    EXPECT_EQ(field, (Vector(4) << 2.0, 0.0, 2.0, 0.0).finished());
    EXPECT_EQ(boundary_injection(g, BoundarySpec::neumann_left(), Vector::Zero(2)).norm(), 0.0);
    EXPECT_THROW((void)boundary_injection(g, BoundarySpec::neumann_left(), Vector::Ones(3)), DimensionError);
    EXPECT_THROW((void)boundary_injection(g, BoundarySpec::all_dirichlet(), Vector::Ones(2)), DomainError);
}

TEST(Injection, AdjointIsTranspose)
{
    const Grid2D g(5);
    std::vector<bool> mask(static_cast<std::size_t>(g.N), false);
    for (int j = 0; j < g.N; j += 3) mask[static_cast<std::size_t>(j)] = true;
    for (const auto& B : {Injection::boundary(g, Side::left), Injection::domain(g), Injection::domain(g, mask)}) {
        const Vector m = random_vector(B.param_dim(), 4), w = random_vector(g.N, 5);
        EXPECT_NEAR(B.apply(m).dot(w), m.dot(B.adjoint(w)), 1e-12);
    }
}

TEST(Injection, NeumannDataSelfConvergence)
{
    // Solutions driven by smooth Neumann data on two grids agree to O(h) at common points.
    auto solve_on = [](int n) {
        const Grid2D g(n);
        const DiscreteOperator A(g, BoundarySpec::neumann_left(), OperatorKind::laplace);
        Vector m(n);
        for (int iy = 0; iy < n; ++iy) m(iy) = std::sin(M_PI * g.y(iy));
        return A.solve(Injection::boundary(g, Side::left).apply(m));
    };
    auto coarse_error = [&](int n) {
        const Vector yc = solve_on(n), yf = solve_on(2 * n);
        const Grid2D gc(n), gf(2 * n);
        double err = 0.0;
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                double avg = 0.0;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) avg += 0.25 * yf(gf.index(2 * ix + a, 2 * iy + b));
                err = std::max(err, std::abs(yc(gc.index(ix, iy)) - avg));
            }
        }
        return err;
    };
    const double e1 = coarse_error(8), e2 = coarse_error(16);
    EXPECT_LT(e2, 0.75 * e1);
    EXPECT_LT(e2, 0.05);
}

TEST(InnerProduct, Examples)
{
    const Grid2D g(2);
    EXPECT_DOUBLE_EQ(inner_l2(g, (Vector(4) << 1, 2, 3, 4).finished(), Vector::Ones(4)), 2.5);
    for (int n : {3, 10}) {
        const Grid2D gn(n);
        EXPECT_NEAR(inner_l2(gn, Vector::Ones(gn.N), Vector::Ones(gn.N)), 1.0, 1e-14);
    }
    Vector a = random_vector(4, 9), b = random_vector(4, 10);
    b -= (inner_l2(g, a, b) / inner_l2(g, a, a)) * a;
    EXPECT_NEAR(inner_l2(g, a, b), 0.0, 1e-14);
    EXPECT_THROW((void)inner_l2(g, Vector::Ones(4), Vector::Ones(3)), DimensionError);
}
