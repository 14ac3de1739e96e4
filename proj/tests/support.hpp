#pragma once

#include <sparsectl/problems.hpp>

#include <random>

namespace testing_support {

using sparsectl::Matrix;
using sparsectl::Vector;

inline Vector random_vector(long n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return sparsectl::GaussianPrior::standard_normal(static_cast<int>(n), rng);
}

inline Vector random_positive(long n, std::uint64_t seed, double lo = 0.5, double hi = 2.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (long i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline Matrix dense(const sparsectl::DiscreteOperator& A) { return Matrix(A.matrix()); }

/// Dense A^{-T} A^{-1}.
inline Matrix dense_gram(const sparsectl::DiscreteOperator& A)
{
    const Matrix Ainv = dense(A).inverse();
    return Ainv.transpose() * Ainv;
}

/// Full-rank factors of the dense Gram matrix.
inline std::shared_ptr<const sparsectl::LowRankSym> full_rank(const sparsectl::DiscreteOperator& A)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense_gram(A));
    auto lr = std::make_shared<sparsectl::LowRankSym>();
    const long N = es.eigenvalues().size();
    lr->lambda = es.eigenvalues().reverse();
    lr->U = es.eigenvectors().rowwise().reverse();
    (void)N;
    return lr;
}

inline double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }
inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

/// Dense covariance square root of a prior, column by column.
inline Matrix dense_cov_sqrt(const sparsectl::GaussianPrior& prior)
{
    const int p = prior.dimension();
    return prior.cov_sqrt_apply(Matrix(Matrix::Identity(p, p)));
}

/// Problem with reduced ranks suitable for small grids.
inline sparsectl::ProblemSpec small_spec(sparsectl::ProblemKind kind, int n)
{
    auto s = sparsectl::ProblemSpec::preset(kind, n);
    s.r = std::min(s.r, n * n);
    s.rtilde = std::min(s.rtilde, kind == sparsectl::ProblemKind::poisson_rhs ? n * n : n);
    return s;
}

} // namespace testing_support
