#pragma once

// Gaussian priors N(m0, C0) for the uncertain parameter.
//
// Two covariance families are supported:
//   boundary1d:  C0 = gamma (-d^2/ds^2)^{-1} on a boundary segment with
//                homogeneous Dirichlet conditions at the segment endpoints;
//   domain2d:    C0 = gamma (-Laplace)^{-2} on the square with Dirichlet on
//                {1} x [0,1] and Neumann on the remaining sides.
//
// Parameter vectors hold nodal values. Discrete white noise carries variance
// 1/(cell measure) per node, so the nodal covariance matrix is C0 divided by
// the cell measure and draws converge under mesh refinement.

#include <cmath>
#include <cstdint>
#include <random>
#include <variant>

#include "grid.hpp"

namespace sparsectl {

class GaussianPrior {
public:
    struct Boundary1D {
        double gamma;
        double h;
        Eigen::SelfAdjointEigenSolver<Matrix> eig;
    };
    struct Domain2D {
        double gamma;
        DiscreteOperator laplacian;
    };

    /// Prior on a segment of n cells (width 1/n) with Dirichlet endpoints.
    [[nodiscard]] static GaussianPrior boundary1d(int n, double gamma, Vector mean = {})
    {
        if (!(gamma > 0.0)) throw DomainError("GaussianPrior: gamma must be positive");
        if (n < 1) throw DomainError("GaussianPrior: segment needs at least one cell");
        if (mean.size() == 0) mean = Vector::Zero(n);
        detail::require_size(mean.size(), n, "GaussianPrior mean");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(fd1d_matrix_dirichlet(n));
        if (eig.eigenvalues().minCoeff() <= 0.0) throw DomainError("GaussianPrior: 1-D operator not positive");
        return GaussianPrior(std::move(mean), Boundary1D{gamma, 1.0 / n, std::move(eig)});
    }

    /// Prior over all grid cells with covariance gamma (-Laplace)^{-2}.
    [[nodiscard]] static GaussianPrior domain2d(const Grid2D& grid, double gamma, Vector mean = {})
    {
        if (!(gamma > 0.0)) throw DomainError("GaussianPrior: gamma must be positive");
        if (mean.size() == 0) mean = Vector::Zero(grid.N);
        detail::require_size(mean.size(), grid.N, "GaussianPrior mean");
        return GaussianPrior(std::move(mean),
                             Domain2D{gamma, DiscreteOperator(grid, BoundarySpec::dirichlet_right_only(),
                                                              OperatorKind::laplace)});
    }

    [[nodiscard]] int dimension() const { return static_cast<int>(mean_.size()); }
    [[nodiscard]] const Vector& mean() const { return mean_; }
    [[nodiscard]] bool is_boundary1d() const { return std::holds_alternative<Boundary1D>(variant_); }
    [[nodiscard]] double gamma() const
    {
        return std::visit([](const auto& v) { return v.gamma; }, variant_);
    }

    /// C0^{1/2} xi for a coefficient vector xi (symmetric square root of the nodal covariance).
    [[nodiscard]] Vector cov_sqrt_apply(const Vector& xi) const
    {
        detail::require_size(xi.size(), dimension(), "cov_sqrt_apply");
        if (const auto* b = std::get_if<Boundary1D>(&variant_)) {
            const Matrix& V = b->eig.eigenvectors();
            const Vector coeff = (V.transpose() * xi).cwiseProduct(b->eig.eigenvalues().cwiseSqrt().cwiseInverse());
            return std::sqrt(b->gamma / b->h) * (V * coeff);
        }
        const auto& d = std::get<Domain2D>(variant_);
        const double h = d.laplacian.grid().h;
        return (std::sqrt(d.gamma) / h) * d.laplacian.solve(xi);
    }

    [[nodiscard]] Matrix cov_sqrt_apply(const Matrix& X) const
    {
        detail::require_size(X.rows(), dimension(), "cov_sqrt_apply");
        if (const auto* b = std::get_if<Boundary1D>(&variant_)) {
            const Matrix& V = b->eig.eigenvectors();
            const Vector scale = b->eig.eigenvalues().cwiseSqrt().cwiseInverse();
            return std::sqrt(b->gamma / b->h) * (V * (scale.asDiagonal() * (V.transpose() * X)));
        }
        const auto& d = std::get<Domain2D>(variant_);
        return (std::sqrt(d.gamma) / d.laplacian.grid().h) * d.laplacian.solve(X);
    }

    /// m0 + C0^{1/2} xi with xi standard normal from a generator seeded by `seed`.
    [[nodiscard]] Vector sample(std::uint64_t seed) const
    {
        std::mt19937_64 rng(seed);
        return mean_ + cov_sqrt_apply(standard_normal(dimension(), rng));
    }

    /// Operator trace gamma * sum 1/lambda_i of the boundary covariance.
    [[nodiscard]] double trace() const
    {
        const auto* b = std::get_if<Boundary1D>(&variant_);
        if (b == nullptr) throw NotImplementedError("GaussianPrior::trace: not implemented for the domain prior");
        return b->gamma * b->eig.eigenvalues().cwiseInverse().sum();
    }

    [[nodiscard]] static Vector standard_normal(int n, std::mt19937_64& rng)
    {
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector xi(n);
        for (int i = 0; i < n; ++i) xi(i) = normal(rng);
        return xi;
    }

private:
    using Variant = std::variant<Boundary1D, Domain2D>;

    GaussianPrior(Vector mean, Variant v) : mean_(std::move(mean)), variant_(std::move(v)) {}

    static Matrix fd1d_matrix_dirichlet(int n) { return fd1d_matrix(n, Condition::dirichlet, Condition::dirichlet); }

    Vector mean_;
    Variant variant_;
};

} // namespace sparsectl
