#pragma once

#include "bmstair/manifold_spec.hpp"
#include "bmstair/sparse_sym_matrix.hpp"
#include "bmstair/types.hpp"

#include <optional>
#include <vector>

namespace bmstair {

/// Quadratic equality constraint <A, Y Y^T> = b.
struct Constraint {
  SparseSymMatrix A;
  Scalar b = 0.0;
};

/// Emits the quadratic constraints that carve the block manifold out of the
/// ambient space: each Stiefel(d) block at rows p..p+d-1 yields d(d+1)/2
/// constraints A = sym(e_{p+s} e_{p+t}^T), b = [s == t], ordered by (s, t)
/// with s <= t. Euclidean blocks emit nothing. Requires d <= r.
std::vector<Constraint> synthesize_constraints(const ManifoldSpec& spec, Index r);

/// min <Q, X X^T> s.t. <A_i, X X^T> = b_i over n x k factors whose rows follow
/// the manifold spec. Immutable after construction and shareable across solves.
///
/// Construction with m = 0 (all-Euclidean specs) is permitted so the geometry
/// and solver paths work on unconstrained problems; certification-path
/// operations reject it.
class QcqpProblem {
 public:
  /// Constraints synthesized from the spec (validated at rank k).
  QcqpProblem(SparseSymMatrix Q, ManifoldSpec spec, Index k);

  /// Explicit constraint list (may be redundant / LICQ-violating on purpose).
  QcqpProblem(SparseSymMatrix Q, ManifoldSpec spec, Index k, std::vector<Constraint> constraints);

  Index dim() const { return Q_.dim(); }
  Index intrinsic_rank() const { return k_; }
  Index num_constraints() const { return static_cast<Index>(constraints_.size()); }
  const SparseSymMatrix& data_matrix() const { return Q_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const ManifoldSpec& spec() const { return spec_; }

 private:
  SparseSymMatrix Q_;
  ManifoldSpec spec_;
  Index k_ = 0;
  std::vector<Constraint> constraints_;
};

/// <Q, Y Y^T>, evaluated column-wise as sum_c <y_c, Q y_c>; Y Y^T is never formed.
Scalar objective(const QcqpProblem& p, const Matrix& Y);

/// Component i is <A_i, Y Y^T> - b_i.
Vector constraint_residuals(const QcqpProblem& p, const Matrix& Y);

struct LicqReport {
  Index jacobian_rank = 0;
  Index m = 0;
  bool holds = false;
  Vector singular_values;  // descending
  Scalar tolerance_used = 0.0;
};

/// Numerical-rank test of the m x (n*r) constraint Jacobian with rows
/// vec(2 A_i Y). tol <= 0 selects max(m, n*r) * sigma_max * machine-epsilon.
/// Dense SVD: intended at desk scale (guarded by a size limit).
LicqReport licq_check(const QcqpProblem& p, const Matrix& Y, Scalar tol = 0.0);

}  // namespace bmstair
