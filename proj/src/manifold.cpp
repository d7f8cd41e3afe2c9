#include "bmstair/manifold.hpp"

#include "bmstair/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

namespace bmstair {

namespace {

void check_point_shape(const ManifoldSpec& spec, const Matrix& Y, const char* who) {
  if (Y.rows() != spec.total_dim())
    throw InvalidArgument(std::string(who) + ": row count does not match manifold spec");
}

/// Polar factor of a d x r matrix with d <= r (orthonormal rows).
Matrix polar_factor(const Matrix& M, const char* who) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().minCoeff() <= 1e-14)
    throw NumericalError(std::string(who) + ": block is numerically rank-deficient");
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

Matrix random_point(const ManifoldSpec& spec, Index r, std::uint64_t seed) {
  if (!spec.feasible_rank(r))
    throw InvalidArgument("random_point: Stiefel block dimension exceeds rank");
  Rng rng(seed);
  Matrix Y(spec.total_dim(), r);
  for (Index i = 0; i < Y.rows(); ++i)
    for (Index j = 0; j < r; ++j) Y(i, j) = rng.normal();
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    auto block = Y.middleRows(spec.block_offset(b), blk.dim);
    block = polar_factor(block, "random_point");
  }
  return Y;
}

Matrix project_tangent(const ManifoldSpec& spec, const Matrix& Y, const Matrix& V) {
  check_point_shape(spec, Y, "project_tangent");
  if (V.rows() != Y.rows() || V.cols() != Y.cols())
    throw InvalidArgument("project_tangent: V shape does not match Y");
  Matrix out = V;
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    const auto B = Y.middleRows(spec.block_offset(b), blk.dim);
    auto Vb = out.middleRows(spec.block_offset(b), blk.dim);
    const Matrix S = 0.5 * (Vb * B.transpose() + B * Vb.transpose());
    Vb -= S * B;
  }
  return out;
}

Matrix retract(const ManifoldSpec& spec, const Matrix& Y, const Matrix& V) {
  check_point_shape(spec, Y, "retract");
  if (V.rows() != Y.rows() || V.cols() != Y.cols())
    throw InvalidArgument("retract: V shape does not match Y");
  Matrix out = Y + V;
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    const Index p = spec.block_offset(b);
    if (V.middleRows(p, blk.dim).isZero(0.0)) {
      out.middleRows(p, blk.dim) = Y.middleRows(p, blk.dim);  // centering, exactly
      continue;
    }
    out.middleRows(p, blk.dim) = polar_factor(out.middleRows(p, blk.dim), "retract");
  }
  return out;
}

Matrix egrad(const QcqpProblem& p, const Matrix& Y) {
  return 2.0 * p.data_matrix().apply(Y);
}

Matrix rgrad(const QcqpProblem& p, const Matrix& Y) {
  return project_tangent(p.spec(), Y, egrad(p, Y));
}

Matrix rhess_vec(const QcqpProblem& p, const Matrix& Y, const Matrix& V,
                 const Matrix& euclidean_grad) {
  const ManifoldSpec& spec = p.spec();
  Matrix HV = 2.0 * p.data_matrix().apply(V);
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    const Index q = spec.block_offset(b);
    const auto B = Y.middleRows(q, blk.dim);
    const auto Gb = euclidean_grad.middleRows(q, blk.dim);
    const Matrix Sg = 0.5 * (Gb * B.transpose() + B * Gb.transpose());
    HV.middleRows(q, blk.dim) -= Sg * V.middleRows(q, blk.dim);
  }
  return project_tangent(spec, Y, HV);
}

Matrix rhess_vec(const QcqpProblem& p, const Matrix& Y, const Matrix& V) {
  const Scalar vnorm = V.norm();
  if (tangency_error(p.spec(), Y, V) > 1e-6 * std::max(1.0, vnorm))
    throw InvalidArgument("rhess_vec: V is not tangent at Y");
  return rhess_vec(p, Y, V, egrad(p, Y));
}

Scalar feasibility_error(const ManifoldSpec& spec, const Matrix& Y) {
  check_point_shape(spec, Y, "feasibility_error");
  Scalar err = 0.0;
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    const auto B = Y.middleRows(spec.block_offset(b), blk.dim);
    const Matrix G = B * B.transpose() - Matrix::Identity(blk.dim, blk.dim);
    err = std::max(err, G.cwiseAbs().maxCoeff());
  }
  return err;
}

Scalar tangency_error(const ManifoldSpec& spec, const Matrix& Y, const Matrix& V) {
  check_point_shape(spec, Y, "tangency_error");
  Scalar err = 0.0;
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    const auto B = Y.middleRows(spec.block_offset(b), blk.dim);
    const auto Vb = V.middleRows(spec.block_offset(b), blk.dim);
    const Matrix S = B * Vb.transpose() + Vb * B.transpose();
    err = std::max(err, S.cwiseAbs().maxCoeff());
  }
  return err;
}

Preconditioner Preconditioner::build(const SparseSymMatrix& Q) {
  Preconditioner P;
  P.n_ = Q.dim();
  const Scalar mu0 = std::max(1e-8, 1e-8 * Q.max_abs());

  SparseMatrix identity(Q.dim(), Q.dim());
  identity.setIdentity();

  Scalar mu = mu0;
  for (int attempt = 0; attempt < 256; ++attempt) {
    SparseMatrix shifted = Q.upper() + mu * identity;
    auto llt = std::make_shared<Eigen::SimplicialLLT<SparseMatrix, Eigen::Upper>>();
    llt->compute(shifted);
    if (llt->info() == Eigen::Success) {
      const SparseMatrix L = llt->matrixL();
      const Vector d = L.diagonal();
      const Scalar ratio = d.maxCoeff() / d.minCoeff();
      const Scalar cond = ratio * ratio;
      if (cond <= 1e6) {
        P.llt_ = std::move(llt);
        P.mu_ = mu;
        P.cond_ = cond;
        return P;
      }
    }
    mu *= 2.0;
  }
  throw NumericalError("Preconditioner: regularization did not terminate (Q not symmetric?)");
}

Matrix Preconditioner::solve(const Matrix& rhs) const {
  if (!llt_) throw InvalidArgument("Preconditioner::solve: preconditioner was not built");
  if (rhs.rows() != n_) throw InvalidArgument("Preconditioner::solve: dimension mismatch");
  return llt_->solve(rhs);
}

Preconditioner build_preconditioner(const QcqpProblem& p) {
  return Preconditioner::build(p.data_matrix());
}

Matrix precondition(const Preconditioner& P, const ManifoldSpec& spec, const Matrix& Y,
                    const Matrix& V) {
  return project_tangent(spec, Y, P.solve(V));
}

}  // namespace bmstair
