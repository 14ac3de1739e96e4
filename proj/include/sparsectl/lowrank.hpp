#pragma once

// Offline setup: truncated spectral decomposition of K = A^{-*} A^{-1},
// the rank-limited forcing basis for A^{-*} A^{-1} B C0^{1/2}, and the
// eigenvalue-based truncation bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "grid.hpp"
#include "prior.hpp"

namespace sparsectl {

/// Truncated eigenpairs K ~ U diag(lambda) U^T, eigenvalues descending.
struct LowRankSym {
    Matrix U;
    Vector lambda;
    /// Max over retained pairs of ||K u_i - lambda_i u_i|| / lambda_1; NaN when not measured.
    double residual = std::numeric_limits<double>::quiet_NaN();
    /// Number of single-column applications of K used to build the factorization.
    long products = 0;
    /// Fewer than the requested number of numerically nonzero eigenvalues were found.
    bool rank_deficient = false;

    [[nodiscard]] int rank() const { return static_cast<int>(lambda.size()); }
    [[nodiscard]] int dim() const { return static_cast<int>(U.rows()); }

    [[nodiscard]] Vector apply(const Vector& v) const { return U * lambda.cwiseProduct(U.transpose() * v); }
    [[nodiscard]] Matrix apply(const Matrix& V) const { return U * (lambda.asDiagonal() * (U.transpose() * V)); }
};

struct EigOptions {
    int oversample = 10;
    /// Extra subspace sweeps before the final Nystrom step (each costs r + d products).
    int power_iters = 0;
    /// When positive, keep sweeping until every retained residual is below residual_tol * lambda_1.
    double residual_tol = 0.0;
    int max_sweeps = 40;
    /// Measure the residual of the returned pairs (r additional products).
    bool measure_residual = false;
    std::uint64_t seed = 0;
};

namespace detail {

inline Matrix thin_orthonormal(const Matrix& Y)
{
    Eigen::HouseholderQR<Matrix> qr(Y);
    return qr.householderQ() * Matrix::Identity(Y.rows(), Y.cols());
}

inline Matrix gaussian_matrix(long rows, long cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix M(rows, cols);
    for (long c = 0; c < cols; ++c) {
        for (long r = 0; r < rows; ++r) M(r, c) = normal(rng);
    }
    return M;
}

/// Nystrom eigendecomposition of a PSD operator from Y = K Q, Q orthonormal.
/// Returns eigenvalues (descending) and orthonormal eigenvectors spanning range(Y).
inline void nystrom(const Matrix& Q, const Matrix& Y, Vector& lambda, Matrix& U)
{
    const double shift = std::numeric_limits<double>::epsilon() * std::max(Y.norm(), 1e-300);
    const Matrix Ys = Y + shift * Q;
    Matrix C = Q.transpose() * Ys;
    C = 0.5 * (C + C.transpose()).eval();
    Eigen::LLT<Matrix> llt(C);
    Matrix F;
    if (llt.info() == Eigen::Success) {
        // F = Ys L^{-T}
        F = llt.matrixL().solve(Ys.transpose()).transpose();
    } else {
        // Fall back to Rayleigh-Ritz on the sample when C is numerically indefinite.
        Eigen::SelfAdjointEigenSolver<Matrix> es(C);
        const Vector w = es.eigenvalues().cwiseMax(shift);
        F = Ys * es.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal();
    }
    Eigen::HouseholderQR<Matrix> qr(F);
    const Matrix Qf = qr.householderQ() * Matrix::Identity(F.rows(), F.cols());
    const Matrix R = Qf.transpose() * F;
    Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeFullU);
    const Vector sigma = svd.singularValues();
    lambda = (sigma.array().square() - shift).cwiseMax(0.0).matrix();
    U = Qf * svd.matrixU();
}

} // namespace detail

/// Randomized eigendecomposition of a symmetric PSD operator given as a block apply
/// `Matrix apply_K(const Matrix&)`. One sweep uses r + oversample products; the single-pass
/// Nystrom variant is used at every sweep, with earlier sweeps acting as subspace iterations.
template <class ApplyK>
[[nodiscard]] LowRankSym eig_lowrank(ApplyK&& apply_K, int N, int r, const EigOptions& opts = {})
{
    if (r < 1) throw DomainError("eig_lowrank: rank must be positive");
    if (r > N) throw DomainError("eig_lowrank: rank exceeds operator dimension");
    const int k = std::min(N, r + std::max(opts.oversample, 0));

    std::mt19937_64 rng(opts.seed);
    LowRankSym out;
    Matrix Q = detail::thin_orthonormal(detail::gaussian_matrix(N, k, rng));
    Matrix Y = apply_K(Q);
    out.products += k;
    for (int q = 0; q < opts.power_iters; ++q) {
        Q = detail::thin_orthonormal(Y);
        Y = apply_K(Q);
        out.products += k;
    }

    Vector lambda;
    Matrix U;
    detail::nystrom(Q, Y, lambda, U);

    auto residual_of = [&](const Matrix& KU, int keep) {
        double worst = 0.0;
        for (int i = 0; i < keep; ++i) {
            worst = std::max(worst, (KU.col(i) - lambda(i) * U.col(i)).norm());
        }
        return lambda(0) > 0.0 ? worst / lambda(0) : 0.0;
    };

    int keep = std::min(r, static_cast<int>(lambda.size()));
    if (opts.residual_tol > 0.0) {
        for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            // K applied to the current Ritz basis doubles as the next subspace iterate.
            Y = apply_K(U);
            out.products += k;
            out.residual = residual_of(Y, keep);
            if (out.residual <= opts.residual_tol) break;
            Q = U;
            detail::nystrom(Q, Y, lambda, U);
        }
    }

    // Retain eigenvalues above the numerical floor.
    const double floor = 1e-14 * lambda(0);
    int numeric_rank = 0;
    while (numeric_rank < keep && lambda(numeric_rank) > floor) ++numeric_rank;
    out.rank_deficient = numeric_rank < r;
    keep = numeric_rank;
    out.U = U.leftCols(keep);
    out.lambda = lambda.head(keep);

    if (opts.measure_residual && opts.residual_tol <= 0.0 && keep > 0) {
        const Matrix KU = apply_K(out.U);
        out.products += keep;
        double worst = 0.0;
        for (int i = 0; i < keep; ++i) worst = std::max(worst, (KU.col(i) - out.lambda(i) * out.U.col(i)).norm());
        out.residual = worst / out.lambda(0);
    }
    return out;
}

/// K = A^{-*} A^{-1} as a block apply; each column costs one forward and one adjoint solve.
[[nodiscard]] inline auto solution_operator_gram(const DiscreteOperator& A)
{
    return [&A](const Matrix& X) -> Matrix { return A.solve(A.solve(X)); };
}

/// Low-rank factorization E F^T of A^{-*} A^{-1} B C0^{1/2} plus the mean forcing e0.
struct ForcingBasis {
    /// e0 = A^{-*}(y_d - A^{-1}(f + B m0)).
    Vector e0;
    /// Columns e_1..e_rt.
    Matrix E;
    /// Orthonormal parameter-space columns f_1..f_rt.
    Matrix F;
    /// g_i = A^{-1} B C0^{1/2} f_i, so that e_i = A^{-*} g_i.
    Matrix G;
    /// Misfit offset c0 = A^{-1}(f + B m0) - y_d (so that e0 = -A^{-*} c0).
    Vector c0;
    /// Singular values of the sampled map, descending (length >= rank).
    Vector singular_values;
    bool truncated = false;

    [[nodiscard]] int rank() const { return static_cast<int>(E.cols()); }
    [[nodiscard]] int dim() const { return static_cast<int>(e0.size()); }

    /// [e0, e1, ..., e_rt] as one N x (rt + 1) matrix.
    [[nodiscard]] Matrix all_modes() const
    {
        Matrix M(e0.size(), E.cols() + 1);
        M.col(0) = e0;
        M.rightCols(E.cols()) = E;
        return M;
    }
};

struct ForcingOptions {
    int oversample = 10;
    int power_iters = 1;
    std::uint64_t seed = 1;
};

/// Builds e0 from two solves and a rank-rt factorization of the map
/// xi -> A^{-*} A^{-1} B C0^{1/2} xi by randomized range finding in parameter space.
[[nodiscard]] inline ForcingBasis build_forcing_basis(const DiscreteOperator& A, const Injection& B,
                                                      const GaussianPrior& prior, const Vector& y_d, const Vector& f,
                                                      int rank, const ForcingOptions& opts = {})
{
    const int N = A.size();
    const int p = prior.dimension();
    detail::require_size(y_d.size(), N, "build_forcing_basis y_d");
    detail::require_size(f.size(), N, "build_forcing_basis f");
    detail::require_size(B.param_dim(), p, "build_forcing_basis injection/prior");
    if (rank < 0) throw DomainError("build_forcing_basis: negative rank");

    ForcingBasis basis;
    basis.c0 = A.solve(Vector(f + B.apply(prior.mean()))) - y_d;
    basis.e0 = -A.solve(basis.c0);

    const int rt = std::min(rank, p);
    basis.truncated = rt < rank;
    if (rt == 0) {
        basis.E = Matrix::Zero(N, 0);
        basis.F = Matrix::Zero(p, 0);
        basis.G = Matrix::Zero(N, 0);
        basis.singular_values = Vector::Zero(0);
        return basis;
    }

    auto forward = [&](const Matrix& X) -> Matrix { return A.solve(A.solve(B.apply(prior.cov_sqrt_apply(X)))); };
    auto adjoint = [&](const Matrix& W) -> Matrix { return prior.cov_sqrt_apply(B.adjoint(A.solve(A.solve(W)))); };

    const int k = std::min(p, rt + std::max(opts.oversample, 0));
    std::mt19937_64 rng(opts.seed);
    Matrix Y = forward(detail::gaussian_matrix(p, k, rng));
    for (int q = 0; q < opts.power_iters; ++q) {
        const Matrix Z = detail::thin_orthonormal(adjoint(detail::thin_orthonormal(Y)));
        Y = forward(Z);
    }
    const Matrix Q = detail::thin_orthonormal(Y);
    const Matrix small = adjoint(Q).transpose(); // Q^T M, k x p
    Eigen::JacobiSVD<Matrix> svd(small, Eigen::ComputeThinV);
    basis.singular_values = svd.singularValues();

    int keep = rt;
    const double floor = 1e-14 * std::max(basis.singular_values(0), 1e-300);
    while (keep > 0 && basis.singular_values(keep - 1) <= floor) --keep;
    if (keep < rt) basis.truncated = true;

    basis.F = svd.matrixV().leftCols(keep);
    basis.G = A.solve(B.apply(prior.cov_sqrt_apply(basis.F)));
    basis.E = A.solve(basis.G);
    return basis;
}

/// Ratio sum_{i>r} w_i / sum_i w_i with w_i = lambda_i / (lambda_i + alpha), sums truncated at the list length.
[[nodiscard]] inline double truncation_bound(const Vector& lambda, double alpha, int r)
{
    if (r < 0 || r > lambda.size()) throw DomainError("truncation_bound: rank outside the eigenvalue list");
    if (!(alpha > 0.0)) throw DomainError("truncation_bound: alpha must be positive");
    if (r == lambda.size()) return 0.0;
    const Vector w = lambda.array() / (lambda.array() + alpha);
    return w.tail(lambda.size() - r).sum() / w.sum();
}

/// Descending eigenvalues of K = A^{-2} taken from the exact separable spectrum of A.
[[nodiscard]] inline Vector gram_spectrum(const DiscreteOperator& A, int count)
{
    Vector mu = A.spectrum().eigenvalues();
    std::vector<double> lam(static_cast<std::size_t>(mu.size()));
    for (long i = 0; i < mu.size(); ++i) lam[static_cast<std::size_t>(i)] = 1.0 / (mu(i) * mu(i));
    std::sort(lam.begin(), lam.end(), std::greater<>());
    const long keep = std::min<long>(count, static_cast<long>(lam.size()));
    return Eigen::Map<Vector>(lam.data(), keep);
}

struct TraceRatio {
    double ratio = 0.0;
    double std_error = 0.0;
    int probes = 0;
    int max_cg_iterations = 0;
};

/// Hutchinson estimate of Tr(S_r - S)/Tr(S), where S = M^{-1} for the forward operator
/// `apply_full` (M = K + D_nu) and S_r = `apply_truncated` is its truncated inverse.
/// S z is computed by conjugate gradients on M, preconditioned with S_r.
template <class ApplyFull, class ApplyTruncated>
[[nodiscard]] TraceRatio trace_ratio_estimate(ApplyFull&& apply_full, ApplyTruncated&& apply_truncated, int N,
                                              int probes, std::uint64_t seed, double cg_tol = 1e-10)
{
    if (probes < 1) throw DomainError("trace_ratio_estimate: need at least one probe");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> num(static_cast<std::size_t>(probes));
    std::vector<double> den(static_cast<std::size_t>(probes));
    TraceRatio out;
    out.probes = probes;
    const int max_iter = 10 * N;

    for (int p = 0; p < probes; ++p) {
        Vector z(N);
        for (int j = 0; j < N; ++j) z(j) = coin(rng) ? 1.0 : -1.0;
        const Vector x0 = apply_truncated(z);
        // Solve M x = z for the correction d = x - x0.
        Vector d = Vector::Zero(N);
        Vector res = z - apply_full(x0);
        const double rhs_norm = z.norm();
        Vector pre = apply_truncated(res);
        Vector dir = pre;
        double rho = res.dot(pre);
        int it = 0;
        while (res.norm() > cg_tol * rhs_norm) {
            if (it >= max_iter) throw ConvergenceError("trace_ratio_estimate: CG did not converge");
            const Vector Md = apply_full(dir);
            const double step = rho / dir.dot(Md);
            d += step * dir;
            res -= step * Md;
            pre = apply_truncated(res);
            const double rho_next = res.dot(pre);
            dir = pre + (rho_next / rho) * dir;
            rho = rho_next;
            ++it;
        }
        out.max_cg_iterations = std::max(out.max_cg_iterations, it);
        num[static_cast<std::size_t>(p)] = -z.dot(d);
        den[static_cast<std::size_t>(p)] = z.dot(x0 + d);
    }

    const double mean_num = std::accumulate(num.begin(), num.end(), 0.0) / probes;
    const double mean_den = std::accumulate(den.begin(), den.end(), 0.0) / probes;
    out.ratio = mean_num / mean_den;
    if (probes > 1) {
        double var = 0.0;
        for (int p = 0; p < probes; ++p) {
            const double dev = num[static_cast<std::size_t>(p)] - out.ratio * den[static_cast<std::size_t>(p)];
            var += dev * dev;
        }
        var /= (probes - 1);
        out.std_error = std::sqrt(var / probes) / std::abs(mean_den);
    }
    return out;
}

} // namespace sparsectl
