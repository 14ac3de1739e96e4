#pragma once

// Cell-centered finite differences on the unit square: grid, boundary
// conditions, the five-point Laplace/Helmholtz operator with an exact sparse
// factorization, and the injection operators that carry the uncertain
// parameter into the state equation.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "error.hpp"

namespace sparsectl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Uniform cell-centered grid on (0,1)^2 with n cells per side.
/// Cell (ix, iy) has center ((ix + 1/2) h, (iy + 1/2) h) and row-major index iy * n + ix.
struct Grid2D {
    int n = 0;
    double h = 0.0;
    int N = 0;

    Grid2D() = default;
    explicit Grid2D(int cells_per_side) : n(cells_per_side), h(1.0 / cells_per_side), N(cells_per_side * cells_per_side)
    {
        if (cells_per_side < 2) {
            throw DomainError("Grid2D: need at least 2 cells per side, got " + std::to_string(cells_per_side));
        }
    }

    [[nodiscard]] int index(int ix, int iy) const { return iy * n + ix; }
    [[nodiscard]] double x(int ix) const { return (ix + 0.5) * h; }
    [[nodiscard]] double y(int iy) const { return (iy + 0.5) * h; }
    /// Area of one cell; the weight of the discrete L2 inner product.
    [[nodiscard]] double cell_area() const { return h * h; }
};

enum class Side { left = 0, right = 1, bottom = 2, top = 3 };
enum class Condition { dirichlet, neumann };

inline const char* to_string(Side s)
{
    switch (s) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
    }
    return "?";
}

/// One homogeneous condition per side of the square.
struct BoundarySpec {
    std::array<Condition, 4> sides{Condition::dirichlet, Condition::dirichlet, Condition::dirichlet,
                                   Condition::dirichlet};

    [[nodiscard]] Condition operator[](Side s) const { return sides[static_cast<int>(s)]; }

    [[nodiscard]] static BoundarySpec all_dirichlet() { return {}; }

    /// Neumann on {0} x [0,1], Dirichlet elsewhere.
    [[nodiscard]] static BoundarySpec neumann_left()
    {
        BoundarySpec bc;
        bc.sides[static_cast<int>(Side::left)] = Condition::neumann;
        return bc;
    }

    /// Dirichlet on {1} x [0,1], Neumann elsewhere.
    [[nodiscard]] static BoundarySpec dirichlet_right_only()
    {
        BoundarySpec bc;
        bc.sides.fill(Condition::neumann);
        bc.sides[static_cast<int>(Side::right)] = Condition::dirichlet;
        return bc;
    }

    [[nodiscard]] int count(Condition c) const
    {
        return static_cast<int>(std::count(sides.begin(), sides.end(), c));
    }

    [[nodiscard]] std::optional<Side> single_neumann_side() const
    {
        if (count(Condition::neumann) != 1) return std::nullopt;
        for (int s = 0; s < 4; ++s) {
            if (sides[s] == Condition::neumann) return static_cast<Side>(s);
        }
        return std::nullopt;
    }

    friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

/// Dense 1-D cell-centered second-difference matrix -d^2/dx^2 on n cells of width 1/n.
/// Dirichlet ends use the ghost value -u (diagonal +1/h^2); Neumann ends use the ghost
/// value u (diagonal -1/h^2).
inline Matrix fd1d_matrix(int n, Condition lo, Condition hi)
{
    const double h = 1.0 / n;
    const double s = 1.0 / (h * h);
    Matrix T = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        T(i, i) = 2.0 * s;
        if (i > 0) T(i, i - 1) = -s;
        if (i + 1 < n) T(i, i + 1) = -s;
    }
    T(0, 0) += (lo == Condition::dirichlet) ? s : -s;
    T(n - 1, n - 1) += (hi == Condition::dirichlet) ? s : -s;
    return T;
}

enum class OperatorKind { laplace, helmholtz };

/// Exact spectrum of the tensor-product operator A = T_x (x) I + I (x) T_y - kappa^2 I.
/// The five-point stencil with ghost-cell boundaries is separable, so the 2-D eigenpairs
/// are products of 1-D eigenvectors with summed eigenvalues.
class SeparableSpectrum {
public:
    SeparableSpectrum(const Grid2D& grid, const BoundarySpec& bc, double shift)
        : grid_(grid), shift_(shift),
          ex_(fd1d_matrix(grid.n, bc[Side::left], bc[Side::right])),
          ey_(fd1d_matrix(grid.n, bc[Side::bottom], bc[Side::top]))
    {
    }

    /// Eigenvalue for x-mode i and y-mode j (both ascending).
    [[nodiscard]] double eigenvalue(int i, int j) const
    {
        return ex_.eigenvalues()(i) + ey_.eigenvalues()(j) - shift_;
    }

    [[nodiscard]] Vector eigenvector(int i, int j) const
    {
        Vector v(grid_.N);
        const auto& vx = ex_.eigenvectors();
        const auto& vy = ey_.eigenvectors();
        for (int iy = 0; iy < grid_.n; ++iy) {
            for (int ix = 0; ix < grid_.n; ++ix) v(grid_.index(ix, iy)) = vx(ix, i) * vy(iy, j);
        }
        return v;
    }

    /// All N eigenvalues, unsorted (index i * n + j).
    [[nodiscard]] Vector eigenvalues() const
    {
        Vector mu(grid_.N);
        for (int i = 0; i < grid_.n; ++i) {
            for (int j = 0; j < grid_.n; ++j) mu(i * grid_.n + j) = eigenvalue(i, j);
        }
        return mu;
    }

    /// Mode pairs (i, j) sorted by ascending |eigenvalue|.
    [[nodiscard]] std::vector<std::pair<int, int>> modes_by_magnitude() const
    {
        std::vector<std::pair<int, int>> modes;
        modes.reserve(static_cast<std::size_t>(grid_.N));
        for (int i = 0; i < grid_.n; ++i) {
            for (int j = 0; j < grid_.n; ++j) modes.emplace_back(i, j);
        }
        std::stable_sort(modes.begin(), modes.end(), [this](const auto& a, const auto& b) {
            return std::abs(eigenvalue(a.first, a.second)) < std::abs(eigenvalue(b.first, b.second));
        });
        return modes;
    }

private:
    Grid2D grid_;
    double shift_;
    Eigen::SelfAdjointEigenSolver<Matrix> ex_;
    Eigen::SelfAdjointEigenSolver<Matrix> ey_;
};

/// Sparse five-point operator (-Laplace or -Laplace - kappa^2) with a cached LU factorization.
/// Immutable after construction; copies share the factorization and solves are reentrant.
class DiscreteOperator {
public:
    DiscreteOperator(const Grid2D& grid, const BoundarySpec& bc, OperatorKind kind, double kappa = 0.0)
        : grid_(grid), bc_(bc), kind_(kind), kappa_(kind == OperatorKind::helmholtz ? kappa : 0.0)
    {
        if (kind == OperatorKind::helmholtz && kappa < 0.0) {
            throw DomainError("assemble: wave number must be non-negative");
        }
        assemble_matrix();
        check_nonsingular();
        auto lu = std::make_shared<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
        lu->analyzePattern(matrix_);
        lu->factorize(matrix_);
        if (lu->info() != Eigen::Success) {
            throw SingularOperatorError("operator singular: sparse LU factorization failed");
        }
        lu_ = std::move(lu);
    }

    [[nodiscard]] const Grid2D& grid() const { return grid_; }
    [[nodiscard]] const BoundarySpec& boundary() const { return bc_; }
    [[nodiscard]] OperatorKind kind() const { return kind_; }
    [[nodiscard]] double kappa() const { return kappa_; }
    [[nodiscard]] const SparseMatrix& matrix() const { return matrix_; }
    [[nodiscard]] int size() const { return grid_.N; }

    [[nodiscard]] Vector apply(const Vector& v) const
    {
        detail::require_size(v.size(), grid_.N, "DiscreteOperator::apply");
        return matrix_ * v;
    }

    /// x = A^{-1} rhs. A is symmetric, so this also realizes A^{-*}.
    [[nodiscard]] Vector solve(const Vector& rhs) const
    {
        detail::require_size(rhs.size(), grid_.N, "DiscreteOperator::solve");
        return lu_->solve(rhs);
    }

    /// Column-wise A^{-1} X.
    [[nodiscard]] Matrix solve(const Matrix& rhs) const
    {
        detail::require_size(rhs.rows(), grid_.N, "DiscreteOperator::solve");
        return lu_->solve(rhs);
    }

    [[nodiscard]] SeparableSpectrum spectrum() const { return {grid_, bc_, kappa_ * kappa_}; }

private:
    void assemble_matrix()
    {
        const int n = grid_.n;
        const double s = 1.0 / (grid_.h * grid_.h);
        const double shift = kappa_ * kappa_;
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(5 * grid_.N));
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const int row = grid_.index(ix, iy);
                double diag = 4.0 * s - shift;
                auto neighbor = [&](int jx, int jy, Side face) {
                    if (jx < 0 || jx >= n || jy < 0 || jy >= n) {
                        diag += (bc_[face] == Condition::dirichlet) ? s : -s;
                    } else {
                        entries.emplace_back(row, grid_.index(jx, jy), -s);
                    }
                };
                neighbor(ix - 1, iy, Side::left);
                neighbor(ix + 1, iy, Side::right);
                neighbor(ix, iy - 1, Side::bottom);
                neighbor(ix, iy + 1, Side::top);
                entries.emplace_back(row, row, diag);
            }
        }
        matrix_.resize(grid_.N, grid_.N);
        matrix_.setFromTriplets(entries.begin(), entries.end());
        matrix_.makeCompressed();
    }

    void check_nonsingular() const
    {
        const Vector mu = spectrum().eigenvalues();
        const double scale = mu.cwiseAbs().maxCoeff();
        const double closest = mu.cwiseAbs().minCoeff();
        if (closest <= 1e-10 * scale) {
            throw SingularOperatorError("operator singular: eigenvalue " + std::to_string(closest) +
                                        " relative to spectrum scale " + std::to_string(scale));
        }
    }

    Grid2D grid_;
    BoundarySpec bc_;
    OperatorKind kind_;
    double kappa_;
    SparseMatrix matrix_;
    std::shared_ptr<const Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

/// Convenience wrapper mirroring the assembly entry point.
[[nodiscard]] inline DiscreteOperator assemble(const Grid2D& grid, const BoundarySpec& bc, OperatorKind kind,
                                               double kappa = 0.0)
{
    return DiscreteOperator(grid, bc, kind, kappa);
}

/// Discrete L2(D) inner product h^2 sum a_j b_j.
[[nodiscard]] inline double inner_l2(const Grid2D& grid, const Vector& a, const Vector& b)
{
    detail::require_size(a.size(), grid.N, "inner_l2");
    detail::require_size(b.size(), grid.N, "inner_l2");
    return grid.cell_area() * a.dot(b);
}

[[nodiscard]] inline double norm_l2(const Grid2D& grid, const Vector& a) { return std::sqrt(inner_l2(grid, a, a)); }

/// Cells adjacent to a side, ordered by increasing coordinate along the side.
[[nodiscard]] inline std::vector<int> side_cells(const Grid2D& grid, Side side)
{
    std::vector<int> cells(static_cast<std::size_t>(grid.n));
    for (int k = 0; k < grid.n; ++k) {
        switch (side) {
        case Side::left: cells[k] = grid.index(0, k); break;
        case Side::right: cells[k] = grid.index(grid.n - 1, k); break;
        case Side::bottom: cells[k] = grid.index(k, 0); break;
        case Side::top: cells[k] = grid.index(k, grid.n - 1); break;
        }
    }
    return cells;
}

/// The operator B that carries the uncertain parameter into the state equation:
/// Neumann data on one side (B m = m / h in the adjacent cells), or a distributed
/// right-hand side extended by zero outside a cell mask.
class Injection {
public:
    [[nodiscard]] static Injection boundary(const Grid2D& grid, Side side)
    {
        Injection b;
        b.grid_ = grid;
        b.cells_ = side_cells(grid, side);
        b.weight_ = 1.0 / grid.h;
        b.side_ = side;
        return b;
    }

    /// Extension by zero from the masked cells; an empty mask selects the whole domain.
    [[nodiscard]] static Injection domain(const Grid2D& grid, std::vector<bool> mask = {})
    {
        Injection b;
        b.grid_ = grid;
        if (mask.empty()) mask.assign(static_cast<std::size_t>(grid.N), true);
        detail::require_size(static_cast<long>(mask.size()), grid.N, "Injection::domain mask");
        b.mask_ = std::move(mask);
        b.weight_ = 1.0;
        return b;
    }

    [[nodiscard]] bool is_boundary() const { return side_.has_value(); }
    [[nodiscard]] std::optional<Side> side() const { return side_; }
    [[nodiscard]] const Grid2D& grid() const { return grid_; }

    /// Dimension of the parameter vector m.
    [[nodiscard]] int param_dim() const { return is_boundary() ? static_cast<int>(cells_.size()) : grid_.N; }

    [[nodiscard]] Vector apply(const Vector& m) const
    {
        detail::require_size(m.size(), param_dim(), "Injection::apply");
        Vector out = Vector::Zero(grid_.N);
        if (is_boundary()) {
            for (std::size_t k = 0; k < cells_.size(); ++k) out(cells_[k]) = weight_ * m(static_cast<long>(k));
        } else {
            for (int j = 0; j < grid_.N; ++j) out(j) = mask_[j] ? m(j) : 0.0;
        }
        return out;
    }

    [[nodiscard]] Matrix apply(const Matrix& M) const
    {
        Matrix out(grid_.N, M.cols());
        for (long c = 0; c < M.cols(); ++c) out.col(c) = apply(Vector(M.col(c)));
        return out;
    }

    /// Euclidean transpose B^T w.
    [[nodiscard]] Vector adjoint(const Vector& w) const
    {
        detail::require_size(w.size(), grid_.N, "Injection::adjoint");
        if (is_boundary()) {
            Vector out(static_cast<long>(cells_.size()));
            for (std::size_t k = 0; k < cells_.size(); ++k) out(static_cast<long>(k)) = weight_ * w(cells_[k]);
            return out;
        }
        Vector out = w;
        for (int j = 0; j < grid_.N; ++j) {
            if (!mask_[j]) out(j) = 0.0;
        }
        return out;
    }

    [[nodiscard]] Matrix adjoint(const Matrix& W) const
    {
        Matrix out(param_dim(), W.cols());
        for (long c = 0; c < W.cols(); ++c) out.col(c) = adjoint(Vector(W.col(c)));
        return out;
    }

private:
    Grid2D grid_;
    std::vector<int> cells_;
    std::vector<bool> mask_;
    double weight_ = 1.0;
    std::optional<Side> side_;
};

/// B m for the single Neumann side of `bc`.
[[nodiscard]] inline Vector boundary_injection(const Grid2D& grid, const BoundarySpec& bc, const Vector& m)
{
    const auto side = bc.single_neumann_side();
    if (!side) throw DomainError("boundary_injection: boundary spec must have exactly one Neumann side");
    return Injection::boundary(grid, *side).apply(m);
}

} // namespace sparsectl
