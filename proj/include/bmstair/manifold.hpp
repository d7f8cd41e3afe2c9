#pragma once

#include "bmstair/problem.hpp"
#include "bmstair/types.hpp"

#include <Eigen/SparseCholesky>

#include <cstdint>
#include <memory>

namespace bmstair {

/// Random feasible point: Euclidean rows standard-normal, each Stiefel block
/// the polar (row-orthonormalizing) factor of a d x r standard-normal draw.
/// Deterministic for a fixed seed.
Matrix random_point(const ManifoldSpec& spec, Index r, std::uint64_t seed);

/// Orthogonal projection of an ambient matrix onto the tangent space at Y:
/// per Stiefel block V_B <- V_B - sym(V_B B^T) B; Euclidean blocks unchanged.
Matrix project_tangent(const ManifoldSpec& spec, const Matrix& Y, const Matrix& V);

/// Polar retraction: Euclidean blocks move straight, Stiefel blocks map
/// B + V_B to its polar factor U W^T (thin SVD). retract(Y, 0) == Y exactly.
/// Throws when B + V_B is numerically rank-deficient (sigma_min <= 1e-14).
Matrix retract(const ManifoldSpec& spec, const Matrix& Y, const Matrix& V);

/// Euclidean gradient of <Q, Y Y^T>: 2 Q Y.
Matrix egrad(const QcqpProblem& p, const Matrix& Y);

/// Riemannian gradient: tangent projection of the Euclidean gradient.
Matrix rgrad(const QcqpProblem& p, const Matrix& Y);

/// Riemannian Hessian-vector product at Y along tangent V: the Euclidean term
/// 2 Q V minus the Weingarten correction sym(G_B B^T) V_B on Stiefel blocks,
/// projected back to the tangent space. Checks that V is tangent.
Matrix rhess_vec(const QcqpProblem& p, const Matrix& Y, const Matrix& V);

/// Same, with the Euclidean gradient precomputed and no tangency check
/// (hot path for the trust-region inner loop).
Matrix rhess_vec(const QcqpProblem& p, const Matrix& Y, const Matrix& V,
                 const Matrix& euclidean_grad);

/// Max over Stiefel blocks of |B B^T - I|_inf (0 for all-Euclidean specs).
Scalar feasibility_error(const ManifoldSpec& spec, const Matrix& Y);

/// Max over Stiefel blocks of |B V_B^T + V_B B^T|_inf.
Scalar tangency_error(const ManifoldSpec& spec, const Matrix& Y, const Matrix& V);

/// P = (Q + mu I)^{-1} applied through a sparsity-ordered Cholesky factor.
/// mu doubles from a scale-relative floor until the factorization succeeds
/// and the condition estimate (squared ratio of extremal factor diagonal
/// entries) drops to 1e6 or below.
class Preconditioner {
 public:
  static Preconditioner build(const SparseSymMatrix& Q);

  Scalar mu() const { return mu_; }
  Scalar condition_estimate() const { return cond_; }

  /// (Q + mu I)^{-1} rhs via forward/back substitution, column by column.
  Matrix solve(const Matrix& rhs) const;

 private:
  Preconditioner() = default;
  // shared so the (read-only) factor can be handed to concurrent solves
  std::shared_ptr<const Eigen::SimplicialLLT<SparseMatrix, Eigen::Upper>> llt_;
  Index n_ = 0;
  Scalar mu_ = 0.0;
  Scalar cond_ = 0.0;
};

Preconditioner build_preconditioner(const QcqpProblem& p);

/// Applies the inverse-regularized-data map to V, then projects to the
/// tangent space at Y; symmetric positive definite on the tangent space.
Matrix precondition(const Preconditioner& P, const ManifoldSpec& spec, const Matrix& Y,
                    const Matrix& V);

}  // namespace bmstair
