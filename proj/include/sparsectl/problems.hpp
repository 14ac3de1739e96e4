#pragma once

// Problem presets, offline setup, the deterministic reduction and online evaluation.
//
//   poisson-neumann  -Laplace y = u + B m, uncertain Neumann data on the left side
//   poisson-rhs      same operator and data, uncertainty as a distributed source
//   helmholtz        -Laplace y - kappa^2 y = u + B m, y_d = 0, Neumann data on the left side

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "optimizer.hpp"

namespace sparsectl {

enum class ProblemKind { poisson_neumann, poisson_rhs, helmholtz };

inline const char* to_string(ProblemKind k)
{
    switch (k) {
    case ProblemKind::poisson_neumann: return "poisson-neumann";
    case ProblemKind::poisson_rhs: return "poisson-rhs";
    case ProblemKind::helmholtz: return "helmholtz";
    }
    return "?";
}

inline std::optional<ProblemKind> parse_problem(const std::string& s)
{
    if (s == "poisson-neumann") return ProblemKind::poisson_neumann;
    if (s == "poisson-rhs") return ProblemKind::poisson_rhs;
    if (s == "helmholtz") return ProblemKind::helmholtz;
    return std::nullopt;
}

struct ProblemSpec {
    ProblemKind kind = ProblemKind::poisson_neumann;
    int n = 64;
    double alpha = 1e-5;
    double beta = 1e-3;
    double kappa = 0.0;
    double gamma = 4.0;
    int r = 180;
    int rtilde = 16;
    /// Constant prior mean.
    double m0 = 0.0;

    [[nodiscard]] static ProblemSpec preset(ProblemKind kind, int n = 64)
    {
        ProblemSpec s;
        s.kind = kind;
        s.n = n;
        switch (kind) {
        case ProblemKind::poisson_neumann: break;
        case ProblemKind::poisson_rhs:
            s.alpha = 5e-5;
            s.gamma = 400.0;
            s.rtilde = 64;
            break;
        case ProblemKind::helmholtz:
            s.alpha = 5e-5;
            s.beta = 5e-4;
            s.kappa = 12.0;
            s.r = 150;
            break;
        }
        return s;
    }

    void validate() const
    {
        if (n < 2) throw DomainError("ProblemSpec: n must be at least 2");
        if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("ProblemSpec: alpha and beta must be positive");
        if (!(gamma > 0.0)) throw DomainError("ProblemSpec: gamma must be positive");
        if (kappa < 0.0) throw DomainError("ProblemSpec: kappa must be non-negative");
        if (r < 1 || rtilde < 0) throw DomainError("ProblemSpec: invalid ranks");
    }
};

/// sin(2 pi x) sin(2 pi y) exp(2x) / 6.
[[nodiscard]] inline double poisson_target(double x, double y)
{
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    return std::sin(two_pi * x) * std::sin(two_pi * y) * std::exp(2.0 * x) / 6.0;
}

struct AssembledProblem {
    ProblemSpec spec;
    Grid2D grid;
    DiscreteOperator A;
    GaussianPrior prior;
    Injection B;
    Vector y_d;
    Vector f;
    /// y_d - A^{-1} f.
    Vector yhat_d;
};

[[nodiscard]] inline AssembledProblem build_problem(const ProblemSpec& spec)
{
    spec.validate();
    const Grid2D grid(spec.n);
    const BoundarySpec bc = BoundarySpec::neumann_left();
    const bool helm = spec.kind == ProblemKind::helmholtz;
    DiscreteOperator A(grid, bc, helm ? OperatorKind::helmholtz : OperatorKind::laplace, helm ? spec.kappa : 0.0);

    Vector y_d = Vector::Zero(grid.N);
    if (!helm) {
        for (int iy = 0; iy < grid.n; ++iy) {
            for (int ix = 0; ix < grid.n; ++ix) y_d(grid.index(ix, iy)) = poisson_target(grid.x(ix), grid.y(iy));
        }
    }
    Vector f = Vector::Zero(grid.N);

    const bool domain = spec.kind == ProblemKind::poisson_rhs;
    const int p = domain ? grid.N : grid.n;
    GaussianPrior prior = domain ? GaussianPrior::domain2d(grid, spec.gamma, Vector::Constant(p, spec.m0))
                                 : GaussianPrior::boundary1d(grid.n, spec.gamma, Vector::Constant(p, spec.m0));
    Injection B = domain ? Injection::domain(grid) : Injection::boundary(grid, Side::left);
    Vector yhat = y_d - A.solve(f);
    return {spec, grid, std::move(A), std::move(prior), std::move(B), std::move(y_d), std::move(f), std::move(yhat)};
}

struct SetupOptions {
    EigOptions eig{10, 0, 1e-6, 40, false, 0};
    ForcingOptions forcing{};
    /// Extra eigenvalues beyond r used for the truncation bound.
    int tail = 500;
};

struct OfflineSetup {
    std::shared_ptr<const LowRankSym> lowrank;
    std::shared_ptr<const ForcingBasis> basis;
    /// Exact leading eigenvalues of A^{-*} A^{-1} (r + tail of them, fewer on small grids).
    Vector spectrum;
    double truncation = 0.0;
};

/// Offline step: eigenpairs of A^{-*} A^{-1}, forcing basis, truncation bound.
[[nodiscard]] inline OfflineSetup offline_setup(const AssembledProblem& prob, int r, int rtilde,
                                                const SetupOptions& opts = {})
{
    OfflineSetup out;
    const int N = prob.grid.N;
    const int rank = std::min(r, N);
    EigOptions eo = opts.eig;
    eo.oversample = std::min(eo.oversample, N - rank);
    out.lowrank = std::make_shared<const LowRankSym>(eig_lowrank(solution_operator_gram(prob.A), N, rank, eo));
    out.basis = std::make_shared<const ForcingBasis>(
        build_forcing_basis(prob.A, prob.B, prob.prior, prob.y_d, prob.f, rtilde, opts.forcing));
    out.spectrum = gram_spectrum(prob.A, rank + std::max(opts.tail, 0));
    out.truncation = truncation_bound(out.spectrum, prob.spec.alpha, rank);
    return out;
}

[[nodiscard]] inline ReducedModel reduced_model(const AssembledProblem& prob, const OfflineSetup& setup)
{
    return {prob.grid, setup.lowrank, setup.basis, prob.spec.alpha, prob.spec.beta};
}

struct DeterministicReduction {
    Vector tilde_y_d;
    /// h^2 sum_i ||g_i||^2, the control-independent trace term, when a basis is given.
    std::optional<double> trace_const;
};

/// Desired state of the mean-parameter problem, y_d - A^{-1}(f + B m0).
[[nodiscard]] inline DeterministicReduction deterministic_reduce(const AssembledProblem& prob,
                                                                 const ForcingBasis* basis = nullptr)
{
    DeterministicReduction out;
    out.tilde_y_d = prob.y_d - prob.A.solve(Vector(prob.f + prob.B.apply(prob.prior.mean())));
    if (basis != nullptr) out.trace_const = prob.grid.cell_area() * basis->G.squaredNorm();
    return out;
}

/// u = S_{nu,r}(e0 - U Lambda U^T B m_hat) for a parameter fluctuation m_hat = m - m0.
[[nodiscard]] inline Vector online_control(const SnuOperator& snu, const ForcingBasis& basis, const Injection& B,
                                           const Vector& m_hat)
{
    detail::require_size(m_hat.size(), B.param_dim(), "online_control");
    detail::require_size(basis.dim(), snu.dim(), "online_control basis");
    return snu.apply(Vector(basis.e0 - snu.lowrank().apply(B.apply(m_hat))));
}

struct SupportReport {
    std::vector<bool> mask;
    long violations = 0;
    int samples = 0;
    double tau = 0.0;

    [[nodiscard]] long support_size() const { return std::count(mask.begin(), mask.end(), true); }
};

/// Support {sqrt(second moment) > tau} and the number of (cell, sample) pairs outside it with |u| > tau.
[[nodiscard]] inline SupportReport shared_support(const Vector& second_moment, const std::vector<Vector>& samples,
                                                  double tau)
{
    SupportReport out;
    out.tau = tau;
    out.samples = static_cast<int>(samples.size());
    out.mask.resize(static_cast<std::size_t>(second_moment.size()));
    for (long j = 0; j < second_moment.size(); ++j) out.mask[static_cast<std::size_t>(j)] = std::sqrt(second_moment(j)) > tau;
    for (const Vector& u : samples) {
        detail::require_size(u.size(), second_moment.size(), "shared_support sample");
        for (long j = 0; j < u.size(); ++j) {
            if (!out.mask[static_cast<std::size_t>(j)] && std::abs(u(j)) > tau) ++out.violations;
        }
    }
    return out;
}

/// 1e-3 of the largest control magnitude over the samples.
[[nodiscard]] inline double default_support_threshold(const std::vector<Vector>& samples)
{
    double m = 0.0;
    for (const Vector& u : samples) m = std::max(m, u.cwiseAbs().maxCoeff());
    return 1e-3 * m;
}

} // namespace sparsectl
