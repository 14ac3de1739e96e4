#pragma once

#include <memory>

#include "lowrank.hpp"

namespace sparsectl {

/// Strictly positive reweighting function nu on the grid, tagged with the epsilon that produced it.
struct WeightField {
    Vector nu;
    double eps = 0.0;

    WeightField() = default;
    WeightField(Vector values, double epsilon) : nu(std::move(values)), eps(epsilon)
    {
        if (nu.size() > 0 && !(nu.minCoeff() > 0.0)) throw DomainError("WeightField: entries must be positive");
    }
};

/// S_{nu,r} = (D_nu + U_r Lambda_r U_r^T)^{-1} applied through the Sherman-Morrison-Woodbury identity
///   S = D^{-1} - D^{-1} U (Lambda^{-1} + U^T D^{-1} U)^{-1} U^T D^{-1},  D = alpha + beta nu.
/// Immutable once built; rebuild whenever nu changes.
class SnuOperator {
public:
    SnuOperator(std::shared_ptr<const LowRankSym> lowrank, const Vector& nu, double alpha, double beta)
        : lowrank_(std::move(lowrank)), alpha_(alpha), beta_(beta)
    {
        if (!lowrank_) throw DomainError("SnuOperator: missing low-rank factors");
        detail::require_size(nu.size(), lowrank_->dim(), "SnuOperator weight");
        if (!(alpha > 0.0)) throw DomainError("SnuOperator: alpha must be positive");
        if (beta < 0.0) throw DomainError("SnuOperator: beta must be non-negative");
        if (!(nu.minCoeff() > 0.0)) throw DomainError("SnuOperator: weight must be positive");

        d_ = (alpha + beta * nu.array()).matrix();
        d_inv_ = d_.cwiseInverse();
        const int r = lowrank_->rank();
        if (r > 0) {
            const Matrix scaled = d_inv_.cwiseSqrt().asDiagonal() * lowrank_->U;
            Matrix core = Matrix::Zero(r, r);
            core.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
            core.diagonal() += lowrank_->lambda.cwiseInverse();
            core_ = core.selfadjointView<Eigen::Lower>();
            llt_.compute(core_);
            if (llt_.info() != Eigen::Success) throw DomainError("SnuOperator: core matrix not positive definite");
        }
    }

    [[nodiscard]] int dim() const { return static_cast<int>(d_.size()); }
    [[nodiscard]] int rank() const { return lowrank_->rank(); }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double beta() const { return beta_; }
    /// alpha + beta nu.
    [[nodiscard]] const Vector& d_nu() const { return d_; }
    [[nodiscard]] const Matrix& core() const { return core_; }
    [[nodiscard]] const LowRankSym& lowrank() const { return *lowrank_; }
    [[nodiscard]] const std::shared_ptr<const LowRankSym>& lowrank_ptr() const { return lowrank_; }

    [[nodiscard]] Matrix apply(const Matrix& V) const
    {
        detail::require_size(V.rows(), dim(), "snu_apply");
        Matrix x = d_inv_.asDiagonal() * V;
        if (rank() > 0) {
            const Matrix t = llt_.solve(lowrank_->U.transpose() * x);
            x.noalias() -= d_inv_.asDiagonal() * (lowrank_->U * t);
        }
        return x;
    }

    [[nodiscard]] Vector apply(const Vector& v) const { return apply(Matrix(v)).col(0); }

    /// diag(S) = D^{-1} - D^{-2} (sum_i u_i .* w_i) with W = U core^{-1}.
    [[nodiscard]] Vector diag() const
    {
        if (rank() == 0) return d_inv_;
        const Matrix W = lowrank_->U * llt_.solve(Matrix::Identity(rank(), rank()));
        const Vector t = lowrank_->U.cwiseProduct(W).rowwise().sum();
        return d_inv_ - d_inv_.cwiseAbs2().cwiseProduct(t);
    }

    /// Forward operator (D_nu + U Lambda U^T) v, the inverse of apply().
    [[nodiscard]] Vector forward(const Vector& v) const { return d_.cwiseProduct(v) + lowrank_->apply(v); }

private:
    std::shared_ptr<const LowRankSym> lowrank_;
    double alpha_;
    double beta_;
    Vector d_;
    Vector d_inv_;
    Matrix core_;
    Eigen::LLT<Matrix> llt_;
};

[[nodiscard]] inline SnuOperator snu_build(std::shared_ptr<const LowRankSym> lowrank, const Vector& nu, double alpha,
                                           double beta)
{
    return {std::move(lowrank), nu, alpha, beta};
}

/// Pointwise second moment ||u||^2_{Omega,r} = sum_{i=0}^{rt} (S e_i)^2 and the mode columns S e_i.
struct SecondMoment {
    Vector s;
    /// N x (rt + 1); column 0 is the mean control S e0.
    Matrix modes;
};

[[nodiscard]] inline SecondMoment second_moment(const SnuOperator& op, const ForcingBasis& basis)
{
    detail::require_size(basis.dim(), op.dim(), "second_moment");
    SecondMoment out;
    out.modes = op.apply(basis.all_modes());
    out.s = out.modes.rowwise().squaredNorm();
    return out;
}

} // namespace sparsectl
