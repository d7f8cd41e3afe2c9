#include "bmstair/problem.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace bmstair {

std::vector<Constraint> synthesize_constraints(const ManifoldSpec& spec, Index r) {
  if (!spec.feasible_rank(r))
    throw InvalidArgument("synthesize_constraints: Stiefel block dimension exceeds rank");
  const Index n = spec.total_dim();
  std::vector<Constraint> out;
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    const Index p = spec.block_offset(b);
    for (Index s = 0; s < blk.dim; ++s) {
      for (Index t = s; t < blk.dim; ++t) {
        std::vector<Triplet> trips;
        if (s == t) {
          trips.push_back({p + s, p + s, 1.0});
        } else {
          trips.push_back({p + s, p + t, 0.5});
        }
        out.push_back({SparseSymMatrix::from_triplets(n, trips), s == t ? 1.0 : 0.0});
      }
    }
  }
  return out;
}

namespace {

void validate_problem(const SparseSymMatrix& Q, const ManifoldSpec& spec, Index k,
                      const std::vector<Constraint>& constraints) {
  if (Q.dim() != spec.total_dim())
    throw InvalidArgument("QcqpProblem: Q dimension does not match manifold spec");
  if (k < 1 || k > Q.dim())
    throw InvalidArgument("QcqpProblem: intrinsic rank k out of range");
  if (!spec.feasible_rank(k))
    throw InvalidArgument("QcqpProblem: some Stiefel block needs d <= k");
  for (const Constraint& c : constraints)
    if (c.A.dim() != Q.dim())
      throw InvalidArgument("QcqpProblem: constraint matrix dimension mismatch");
}

}  // namespace

QcqpProblem::QcqpProblem(SparseSymMatrix Q, ManifoldSpec spec, Index k)
    : Q_(std::move(Q)), spec_(std::move(spec)), k_(k) {
  constraints_ = synthesize_constraints(spec_, k_);
  validate_problem(Q_, spec_, k_, constraints_);
}

QcqpProblem::QcqpProblem(SparseSymMatrix Q, ManifoldSpec spec, Index k,
                         std::vector<Constraint> constraints)
    : Q_(std::move(Q)), spec_(std::move(spec)), k_(k), constraints_(std::move(constraints)) {
  validate_problem(Q_, spec_, k_, constraints_);
}

Scalar objective(const QcqpProblem& p, const Matrix& Y) {
  if (Y.rows() != p.dim()) throw InvalidArgument("objective: Y has wrong row count");
  return dot(Y, p.data_matrix().apply(Y));
}

Vector constraint_residuals(const QcqpProblem& p, const Matrix& Y) {
  if (Y.rows() != p.dim())
    throw InvalidArgument("constraint_residuals: Y has wrong row count");
  const Index m = p.num_constraints();
  Vector res(m);
  for (Index i = 0; i < m; ++i) {
    const Constraint& c = p.constraints()[static_cast<std::size_t>(i)];
    res[i] = dot(Y, c.A.apply(Y)) - c.b;
  }
  return res;
}

LicqReport licq_check(const QcqpProblem& p, const Matrix& Y, Scalar tol) {
  const Index m = p.num_constraints();
  if (m == 0)
    throw InvalidArgument("licq_check: problem has no constraints (LICQ is vacuous)");
  if (Y.rows() != p.dim()) throw InvalidArgument("licq_check: Y has wrong row count");
  const Index nr = Y.size();
  if (m * nr > Index(50'000'000))
    throw NumericalError("licq_check: dense Jacobian would be too large; desk-scale diagnostic only");

  Matrix jac(m, nr);
  for (Index i = 0; i < m; ++i) {
    const Matrix grad = 2.0 * p.constraints()[static_cast<std::size_t>(i)].A.apply(Y);
    jac.row(i) = Eigen::Map<const Vector>(grad.data(), nr);
  }

  Eigen::BDCSVD<Matrix> svd(jac);
  const Vector sigma = svd.singularValues();
  const Scalar sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar threshold =
      tol > 0 ? tol : static_cast<Scalar>(std::max(m, nr)) * sigma_max * eps;

  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > threshold) ++rank;

  LicqReport report;
  report.jacobian_rank = rank;
  report.m = m;
  report.holds = rank == m;
  report.singular_values = sigma;
  report.tolerance_used = threshold;
  return report;
}

}  // namespace bmstair
