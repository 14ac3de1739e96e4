#pragma once

// Reduced objective in the weight nu, its gradient G_r and Hessian action H_r,
// the diagonal preconditioner, and the reweighting solvers:
//   IRLS          fixed-point iteration nu <- (||u||^2_{Omega,r} + eps^2)^{-1/2}
//   or-IRLS       the same with over-relaxation theta > 1
//   NIRLS         inexact Newton-CG on G_r(nu) = 0 after a few or-IRLS steps
//
// G_r and H_r are the scaled derivatives: dJ/dnu = (beta/2) G_r, d2J/dnu2 = (beta/2) H_r.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reweighted.hpp"

namespace sparsectl {

enum class Method { irls, or_irls, nirls };

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::irls: return "irls";
    case Method::or_irls: return "or-irls";
    case Method::nirls: return "nirls";
    }
    return "?";
}

inline std::optional<Method> parse_method(const std::string& s)
{
    if (s == "irls") return Method::irls;
    if (s == "or-irls") return Method::or_irls;
    if (s == "nirls") return Method::nirls;
    return std::nullopt;
}

/// eps_k = max(eps0 * factor^k, eps_min); factor = 1 gives a fixed value.
struct EpsSchedule {
    double eps0 = 1e-7;
    double factor = 1.0;
    double eps_min = 1e-7;

    [[nodiscard]] static EpsSchedule fixed(double eps) { return {eps, 1.0, eps}; }
    [[nodiscard]] static EpsSchedule geometric(double eps0, double factor, double eps_min)
    {
        return {eps0, factor, eps_min};
    }

    [[nodiscard]] double at(int k) const
    {
        if (factor == 1.0) return eps0;
        return std::max(eps0 * std::pow(factor, k), eps_min);
    }
};

struct SolverConfig {
    double alpha = 1e-5;
    double beta = 1e-3;
    EpsSchedule eps = EpsSchedule::fixed(1e-7);
    /// Over-relaxation for IRLS steps (1 = plain IRLS).
    double theta = 1.0;
    int n_cg = 3;
    double cg_rel_tol = 1e-2;
    double tol_grad = 1e-6;
    int max_iter = 1000;
    /// Over-relaxed IRLS steps before Newton.
    int warmup_irls = 15;
    /// Over-relaxation used during the Newton warm-up.
    double warmup_theta = 1.5;
    /// Largest relative decrease of any nu entry in one Newton step.
    double nu_damping = 0.9;
    /// Record objective values in the convergence history.
    bool record_objective = true;

    void validate() const
    {
        if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("SolverConfig: alpha and beta must be positive");
        if (!(eps.eps0 > 0.0) || !(eps.eps_min > 0.0)) throw DomainError("SolverConfig: eps must be positive");
        if (eps.factor <= 0.0 || eps.factor > 1.0) throw DomainError("SolverConfig: eps factor must lie in (0, 1]");
        if (theta < 1.0 || theta >= 2.0) throw DomainError("SolverConfig: theta must lie in [1, 2)");
        if (warmup_theta < 1.0 || warmup_theta >= 2.0) throw DomainError("SolverConfig: warmup theta must lie in [1, 2)");
        if (n_cg < 1) throw DomainError("SolverConfig: n_cg must be at least 1");
        if (max_iter < 1) throw DomainError("SolverConfig: max_iter must be at least 1");
        if (!(nu_damping > 0.0 && nu_damping < 1.0)) throw DomainError("SolverConfig: nu_damping must lie in (0, 1)");
    }
};

struct IterationRow {
    int iter = 0;
    std::string method;
    double eps = 0.0;
    double grad_norm = 0.0;
    double objective = 0.0;
    double cost_units = 0.0;
    int n_cg = 0;
};

struct ConvergenceRecord {
    std::vector<IterationRow> rows;

    /// Cumulative cost at the first row with grad_norm <= tol, if any.
    [[nodiscard]] std::optional<double> cost_to(double tol) const
    {
        for (const auto& r : rows) {
            if (r.grad_norm <= tol) return r.cost_units;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::optional<int> iterations_to(double tol) const
    {
        for (const auto& r : rows) {
            if (r.grad_norm <= tol) return r.iter;
        }
        return std::nullopt;
    }
};

/// Everything the reduced problem needs: low-rank factors, forcing basis, weights, grid.
struct ReducedModel {
    Grid2D grid;
    std::shared_ptr<const LowRankSym> lowrank;
    std::shared_ptr<const ForcingBasis> basis;
    double alpha = 1e-5;
    double beta = 1e-3;

    [[nodiscard]] SnuOperator snu(const Vector& nu) const { return {lowrank, nu, alpha, beta}; }
};

struct SolveResult {
    WeightField nu;
    Vector u_mean;
    /// N x rt columns S e_i, i >= 1.
    Matrix modes;
    Vector second_moment;
    ConvergenceRecord record;
    bool converged = false;
    double grad_norm = 0.0;
};

/// IRLS unit r (r + 2 rt); Newton-CG step 2 r (r + rt + rt n_cg); result normalized by the IRLS unit.
[[nodiscard]] inline double cost_units(int r, int rt, int n_cg, Method method)
{
    if (r <= 0) throw DomainError("cost_units: r must be positive");
    const double unit = static_cast<double>(r) * (r + 2.0 * rt);
    if (method != Method::nirls) return 1.0;
    return 2.0 * r * (r + rt + static_cast<double>(rt) * n_cg) / unit;
}

struct Gradient {
    Vector g;
    SecondMoment moment;
};

/// G_r(nu) = sum_{i=0}^{rt} (S e_i)^2 + eps^2 - 1/nu^2.
[[nodiscard]] inline Gradient gradient(const SnuOperator& snu, const ForcingBasis& basis, const Vector& nu, double eps)
{
    detail::require_size(nu.size(), snu.dim(), "gradient");
    Gradient out;
    out.moment = second_moment(snu, basis);
    out.g = (out.moment.s.array() + eps * eps - nu.array().square().inverse()).matrix();
    return out;
}

/// Closed-form misfit for the exact objective: the A-solver and the offset/companion data.
struct MisfitData {
    const DiscreteOperator* A = nullptr;
};

namespace detail {

inline double reweighting_integral(const Grid2D& grid, const Vector& nu, const Vector& s, double eps)
{
    return grid.cell_area() * (nu.cwiseProduct(s).array() + eps * eps * nu.array() + nu.array().inverse()).sum();
}

} // namespace detail

/// Reduced objective J(nu, eps) with the Gaussian expectation of the misfit taken in closed form,
/// using exact solves with A:
///   1/2 ||A^{-1} S e0 + c0||^2 + 1/2 sum_i ||A^{-1} S e_i - g_i||^2 + alpha/2 sum_{i>=0} ||S e_i||^2
///   + beta/2 int (nu s + eps^2 nu + 1/nu).
/// Additive constants from parameter directions outside span(F) are dropped.
[[nodiscard]] inline double objective_reduced(const Grid2D& grid, const SnuOperator& snu, const ForcingBasis& basis,
                                              const Vector& nu, double eps, const MisfitData& misfit)
{
    if (misfit.A == nullptr) throw DomainError("objective_reduced: missing A-solver");
    if (basis.G.cols() != basis.E.cols()) throw DomainError("objective_reduced: missing G companions");
    const SecondMoment m = second_moment(snu, basis);
    const Matrix states = misfit.A->solve(m.modes);
    double q = (states.col(0) + basis.c0).squaredNorm();
    for (int i = 0; i < basis.rank(); ++i) q += (states.col(i + 1) - basis.G.col(i)).squaredNorm();
    q += snu.alpha() * m.modes.squaredNorm();
    q *= 0.5 * grid.cell_area();
    return q + 0.5 * snu.beta() * detail::reweighting_integral(grid, nu, m.s, eps);
}

/// Quadratic part Q of the objective for controls given by mode columns W = [w_0, ..., w_rt]
/// (u = w_0 - sum_i w_i eta_i), using the low-rank K_r = U Lambda U^T in place of A^{-*}A^{-1}.
/// This is the model that S_{nu,r} minimizes exactly, so IRLS is monotone in it.
[[nodiscard]] inline double misfit_lowrank(const Grid2D& grid, const LowRankSym& lowrank, const ForcingBasis& basis,
                                           const Matrix& W, double alpha)
{
    const Matrix proj = lowrank.U.transpose() * W;
    double q = (lowrank.lambda.asDiagonal() * proj).cwiseProduct(proj).sum();
    q -= 2.0 * W.cwiseProduct(basis.all_modes()).sum();
    q += basis.c0.squaredNorm() + basis.G.squaredNorm();
    q += alpha * W.squaredNorm();
    return 0.5 * grid.cell_area() * q;
}

/// Reduced objective with the low-rank misfit model; no PDE solves.
[[nodiscard]] inline double objective_lowrank(const Grid2D& grid, const SnuOperator& snu, const ForcingBasis& basis,
                                              const Vector& nu, double eps, const SecondMoment* cached = nullptr)
{
    const SecondMoment m = cached ? *cached : second_moment(snu, basis);
    return misfit_lowrank(grid, snu.lowrank(), basis, m.modes, snu.alpha()) +
           0.5 * snu.beta() * detail::reweighting_integral(grid, nu, m.s, eps);
}

/// Regularized objective Q(u) + beta int sqrt(||u||^2_{Omega,r} + eps^2) for controls given by modes W.
[[nodiscard]] inline double objective_regularized(const Grid2D& grid, const LowRankSym& lowrank,
                                                  const ForcingBasis& basis, const Matrix& W, double alpha, double beta,
                                                  double eps)
{
    const Vector s = W.rowwise().squaredNorm();
    return misfit_lowrank(grid, lowrank, basis, W, alpha) +
           beta * grid.cell_area() * (s.array() + eps * eps).sqrt().sum();
}

/// (1 - theta) nu_k + theta (s + eps^2)^{-1/2}, floored to stay positive under over-relaxation.
[[nodiscard]] inline Vector irls_update(const Vector& s, const Vector& nu_k, double eps_next, double theta)
{
    detail::require_size(s.size(), nu_k.size(), "irls_update");
    const Vector target = (s.array() + eps_next * eps_next).rsqrt().matrix();
    if (theta == 1.0) return target;
    const double floor = 1e-3 * eps_next / (1.0 + s.maxCoeff());
    return ((1.0 - theta) * nu_k + theta * target).cwiseMax(floor);
}

/// H_r(nu) dnu = -2 beta sum_i (S e_i) .* S((S e_i) .* dnu) + (2 / nu^3) .* dnu.
[[nodiscard]] inline Vector hessvec(const SnuOperator& snu, const Matrix& modes, const Vector& nu, const Vector& dnu)
{
    detail::require_size(dnu.size(), snu.dim(), "hessvec");
    Vector out = (2.0 * dnu.array() / nu.array().cube()).matrix();
    if (snu.beta() == 0.0 || modes.cols() == 0) return out;
    const Matrix weighted = modes.array().colwise() * dnu.array();
    const Matrix back = snu.apply(weighted);
    out -= 2.0 * snu.beta() * modes.cwiseProduct(back).rowwise().sum();
    return out;
}

/// Exact diagonal of H_r. With `floor` set, non-positive entries are replaced by 2 / nu^3, the
/// always-positive part of the diagonal, so the preconditioner keeps the scale of every cell.
[[nodiscard]] inline Vector precond_diag(const SnuOperator& snu, const Vector& s, const Vector& nu, bool floor = true)
{
    const Vector positive = (2.0 * nu.array().cube().inverse()).matrix();
    Vector p = positive;
    if (snu.beta() != 0.0) p -= 2.0 * snu.beta() * snu.diag().cwiseProduct(s);
    if (floor) {
        for (long j = 0; j < p.size(); ++j) {
            if (!(p(j) > 0.0)) p(j) = positive(j);
        }
    }
    return p;
}

struct PcgResult {
    Vector x;
    int iters = 0;
    bool curvature_flag = false;
    double rel_residual = 0.0;
};

/// Preconditioned CG on H x = rhs with diagonal preconditioner P, stopping after n_cg iterations,
/// at relative residual rel_tol, or on non-positive curvature.
template <class HessApply>
[[nodiscard]] PcgResult pcg(HessApply&& hess, const Vector& precond, const Vector& rhs, int n_cg, double rel_tol = 1e-2)
{
    if (n_cg < 1) throw DomainError("pcg: n_cg must be at least 1");
    detail::require_size(precond.size(), rhs.size(), "pcg");
    PcgResult out;
    out.x = Vector::Zero(rhs.size());
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return out;
    Vector r = rhs;
    Vector z = r.cwiseQuotient(precond);
    Vector p = z;
    double rz = r.dot(z);
    for (int k = 0; k < n_cg; ++k) {
        const Vector Hp = hess(p);
        const double curv = p.dot(Hp);
        if (curv <= 0.0) {
            out.curvature_flag = true;
            if (k == 0) out.x = z;
            break;
        }
        const double step = rz / curv;
        out.x += step * p;
        r -= step * Hp;
        out.iters = k + 1;
        out.rel_residual = r.norm() / rhs_norm;
        if (out.rel_residual <= rel_tol) break;
        z = r.cwiseQuotient(precond);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    if (out.curvature_flag && out.iters == 0) out.iters = 1;
    return out;
}

struct OptimalityResidual {
    double grad_norm = 0.0;
    double normal_eq_residual = 0.0;
};

/// Gradient norm at nu and the worst relative residual of (K_r + D_nu)(S e_i) = e_i.
[[nodiscard]] inline OptimalityResidual optimality_residual(const ReducedModel& model, const Vector& nu, double eps)
{
    const SnuOperator snu = model.snu(nu);
    const Gradient g = gradient(snu, *model.basis, nu, eps);
    OptimalityResidual out;
    out.grad_norm = norm_l2(model.grid, g.g);
    const Matrix rhs = model.basis->all_modes();
    for (long i = 0; i < rhs.cols(); ++i) {
        const double scale = rhs.col(i).norm();
        if (scale == 0.0) continue;
        const Vector w = g.moment.modes.col(i);
        out.normal_eq_residual = std::max(out.normal_eq_residual, (snu.forward(w) - rhs.col(i)).norm() / scale);
    }
    return out;
}

namespace detail {

inline SolveResult finish(const ReducedModel& model, Vector nu, double eps, const SecondMoment& m, double grad_norm,
                          ConvergenceRecord record, bool converged)
{
    (void)model;
    SolveResult out;
    out.nu = WeightField(std::move(nu), eps);
    out.u_mean = m.modes.col(0);
    out.modes = m.modes.rightCols(m.modes.cols() - 1);
    out.second_moment = m.s;
    out.record = std::move(record);
    out.converged = converged;
    out.grad_norm = grad_norm;
    return out;
}

/// Runs reweighting steps starting at nu; returns true when the gradient tolerance is met.
/// On return nu/moment/grad_norm describe the last evaluated iterate.
struct IrlsState {
    Vector nu;
    SecondMoment moment;
    double grad_norm = 0.0;
    double eps = 0.0;
    int iter = 0;
    double cost = 0.0;
};

inline bool irls_steps(const ReducedModel& model, const SolverConfig& cfg, double theta, int steps, const char* tag,
                       IrlsState& st, ConvergenceRecord& record)
{
    for (int k = 0; k < steps; ++k) {
        const double eps = cfg.eps.at(st.iter + 1);
        const SnuOperator snu = model.snu(st.nu);
        const Gradient g = gradient(snu, *model.basis, st.nu, eps);
        st.moment = g.moment;
        st.grad_norm = norm_l2(model.grid, g.g);
        st.eps = eps;
        st.cost += 1.0;
        IterationRow row;
        row.iter = st.iter;
        row.method = tag;
        row.eps = eps;
        row.grad_norm = st.grad_norm;
        row.objective = cfg.record_objective ? objective_lowrank(model.grid, snu, *model.basis, st.nu, eps, &g.moment) : 0.0;
        row.cost_units = st.cost;
        record.rows.push_back(row);
        if (st.grad_norm <= cfg.tol_grad) return true;
        st.nu = irls_update(g.moment.s, st.nu, eps, theta);
        ++st.iter;
    }
    return false;
}

} // namespace detail

/// Norm-reweighting (IRLS) with optional over-relaxation cfg.theta, starting from nu = 1.
/// Terminates when ||G_r(nu^k)||_{L2} <= tol_grad and returns that iterate.
[[nodiscard]] inline SolveResult irls_solve(const ReducedModel& model, const SolverConfig& cfg)
{
    cfg.validate();
    detail::IrlsState st;
    st.nu = Vector::Ones(model.grid.N);
    ConvergenceRecord record;
    const char* tag = cfg.theta == 1.0 ? "irls" : "or-irls";
    if (detail::irls_steps(model, cfg, cfg.theta, cfg.max_iter, tag, st, record)) {
        return detail::finish(model, st.nu, st.eps, st.moment, st.grad_norm, std::move(record), true);
    }
    // Budget exhausted: evaluate the final iterate for a consistent result.
    const double eps = cfg.eps.at(st.iter + 1);
    const Gradient g = gradient(model.snu(st.nu), *model.basis, st.nu, eps);
    return detail::finish(model, st.nu, eps, g.moment, norm_l2(model.grid, g.g), std::move(record), false);
}

/// Newton-CG reweighting (NIRLS): warm-up with over-relaxed IRLS, then inexact Newton steps
/// with the exact Hessian diagonal as preconditioner and an elementwise damping safeguard.
[[nodiscard]] inline SolveResult nirls_solve(const ReducedModel& model, const SolverConfig& cfg)
{
    cfg.validate();
    detail::IrlsState st;
    st.nu = Vector::Ones(model.grid.N);
    ConvergenceRecord record;
    const int warm = std::min(cfg.warmup_irls, cfg.max_iter);
    if (warm > 0 && detail::irls_steps(model, cfg, cfg.warmup_theta, warm, "or-irls", st, record)) {
        return detail::finish(model, st.nu, st.eps, st.moment, st.grad_norm, std::move(record), true);
    }

    const int r = model.lowrank->rank();
    const int rt = model.basis->rank();
    while (st.iter < cfg.max_iter) {
        const double eps = cfg.eps.at(st.iter + 1);
        const SnuOperator snu = model.snu(st.nu);
        const Gradient g = gradient(snu, *model.basis, st.nu, eps);
        st.moment = g.moment;
        st.eps = eps;
        st.grad_norm = norm_l2(model.grid, g.g);

        IterationRow row;
        row.iter = st.iter;
        row.method = "nirls";
        row.eps = eps;
        row.grad_norm = st.grad_norm;
        row.objective = cfg.record_objective ? objective_lowrank(model.grid, snu, *model.basis, st.nu, eps, &g.moment) : 0.0;

        if (st.grad_norm <= cfg.tol_grad) {
            st.cost += 1.0;
            row.cost_units = st.cost;
            record.rows.push_back(row);
            return detail::finish(model, st.nu, st.eps, st.moment, st.grad_norm, std::move(record), true);
        }

        const Vector P = precond_diag(snu, g.moment.s, st.nu);
        const auto hess = [&](const Vector& v) { return hessvec(snu, g.moment.modes, st.nu, v); };
        const PcgResult step = pcg(hess, P, Vector(-g.g), cfg.n_cg, cfg.cg_rel_tol);

        double s = 1.0;
        for (long j = 0; j < step.x.size(); ++j) {
            if (step.x(j) < 0.0) s = std::min(s, -cfg.nu_damping * st.nu(j) / step.x(j));
        }
        st.nu = (st.nu + s * step.x).cwiseMin(1.0 / eps);

        st.cost += cost_units(r, rt, step.iters, Method::nirls);
        row.cost_units = st.cost;
        row.n_cg = step.iters;
        record.rows.push_back(row);
        ++st.iter;
    }
    // Budget exhausted: evaluate the final iterate for a consistent result.
    const double eps = cfg.eps.at(st.iter + 1);
    const SnuOperator snu = model.snu(st.nu);
    const Gradient g = gradient(snu, *model.basis, st.nu, eps);
    return detail::finish(model, st.nu, eps, g.moment, norm_l2(model.grid, g.g), std::move(record), false);
}

[[nodiscard]] inline SolveResult solve(const ReducedModel& model, Method method, SolverConfig cfg)
{
    switch (method) {
    case Method::irls: cfg.theta = 1.0; return irls_solve(model, cfg);
    case Method::or_irls:
        if (cfg.theta == 1.0) cfg.theta = 1.5;
        return irls_solve(model, cfg);
    case Method::nirls: return nirls_solve(model, cfg);
    }
    throw DomainError("solve: unknown method");
}

} // namespace sparsectl
