#include "bmstair/certify.hpp"

#include "bmstair/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>

namespace bmstair {

namespace {

constexpr Index kDenseFallbackLimit = 20'000'000;  // entries of the stacked system

/// Stacked system K (n*r x m) with K(:, i) = vec(A_i Y).
SparseMatrix stack_constraint_gradients(const QcqpProblem& p, const Matrix& Y) {
  const Index nr = Y.size();
  const Index m = p.num_constraints();
  std::vector<Eigen::Triplet<Scalar>> trips;
  for (Index i = 0; i < m; ++i) {
    const Matrix AiY = p.constraints()[static_cast<std::size_t>(i)].A.apply(Y);
    for (Index c = 0; c < AiY.cols(); ++c)
      for (Index rr = 0; rr < AiY.rows(); ++rr)
        if (AiY(rr, c) != 0.0)
          trips.emplace_back(static_cast<int>(c * AiY.rows() + rr), static_cast<int>(i),
                             AiY(rr, c));
  }
  SparseMatrix K(nr, m);
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

}  // namespace

MultiplierSolution compute_multipliers(const QcqpProblem& p, const Matrix& Y) {
  const Index m = p.num_constraints();
  if (m == 0) throw InvalidArgument("compute_multipliers: problem has no constraints");
  if (Y.rows() != p.dim()) throw InvalidArgument("compute_multipliers: Y has wrong row count");

  const Index nr = Y.size();
  const SparseMatrix K = stack_constraint_gradients(p, Y);
  const Matrix QY = p.data_matrix().apply(Y);
  const Eigen::Map<const Vector> q(QY.data(), nr);

  MultiplierSolution out;
  bool fallback = false;

  {
    const SparseMatrix G = (SparseMatrix(K.transpose()) * K).pruned();
    const Vector rhs = -(K.transpose() * q);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(G);
    if (ldlt.info() == Eigen::Success) {
      const Vector D = ldlt.vectorD();
      const Scalar dmax = D.cwiseAbs().maxCoeff();
      const Scalar dmin = D.cwiseAbs().minCoeff();
      // G is a Gram matrix; a non-positive or vanishing pivot means K lost rank.
      if (D.minCoeff() <= 0 || dmin <= 1e-12 * dmax) {
        fallback = true;
      } else {
        Vector lambda = ldlt.solve(rhs);
        for (int it = 0; it < 2; ++it) lambda += ldlt.solve(rhs - G * lambda);
        out.lambda = std::move(lambda);
        out.rank_deficient = false;
      }
    } else {
      fallback = true;
    }
  }

  if (fallback) {
    if (nr * m > kDenseFallbackLimit)
      throw NumericalError(
          "compute_multipliers: multiplier system is rank-deficient and too large for the "
          "dense minimum-norm fallback");
    const Matrix Kd(K);
    Eigen::BDCSVD<Matrix> svd(Kd, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sigma = svd.singularValues();
    const Scalar sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    const Scalar tol = static_cast<Scalar>(std::max(nr, m)) * sigma_max * eps;

    Vector coeff = svd.matrixU().transpose() * (-q);
    Index rank = 0;
    for (Index i = 0; i < sigma.size(); ++i) {
      if (sigma[i] > tol) {
        coeff[i] /= sigma[i];
        ++rank;
      } else {
        coeff[i] = 0.0;
      }
    }
    out.lambda = svd.matrixV() * coeff;
    out.rank_deficient = rank < m;
  }

  const Vector residual = K * out.lambda + q;
  out.stationarity_residual = residual.norm() / std::max(1.0, q.norm());
  return out;
}

SparseSymMatrix build_certificate(const QcqpProblem& p, const Vector& lambda) {
  if (lambda.size() != p.num_constraints())
    throw InvalidArgument("build_certificate: lambda has wrong length");
  std::vector<Triplet> trips = p.data_matrix().entries();
  for (Index i = 0; i < lambda.size(); ++i) {
    for (const Triplet& t : p.constraints()[static_cast<std::size_t>(i)].A.entries())
      trips.push_back({t.row, t.col, lambda[i] * t.value});
  }
  return SparseSymMatrix::from_triplets(p.dim(), trips);
}

bool psd_check(const SparseSymMatrix& S, Scalar eps) {
  if (!(eps > 0)) throw InvalidArgument("psd_check: eps must be positive");
  SparseMatrix identity(S.dim(), S.dim());
  identity.setIdentity();
  const SparseMatrix shifted = S.upper() + eps * identity;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Upper> llt(shifted);
  return llt.info() == Eigen::Success;
}

EigPair min_eigpair(const SparseSymMatrix& S, Scalar tol, std::uint64_t seed) {
  const Index n = S.dim();
  if (n == 0) throw InvalidArgument("min_eigpair: empty matrix");
  const Scalar scale = 1.0 + S.gershgorin_scale();
  const Scalar sigma = S.gershgorin_upper();  // lambda_max(S) <= sigma

  // Largest eigenpair of the PSD operator sigma I - S by restarted Lanczos
  // with full reorthogonalization; translates back via eig = sigma - theta.
  const auto op = [&](const Vector& x) -> Vector { return sigma * x - S.apply(x); };

  Rng rng(seed != 0 ? seed : 0x9e3779b97f4a7c15ULL);
  Vector start(n);
  for (Index i = 0; i < n; ++i) start[i] = rng.normal();
  start.normalize();

  const long cap = 10 * static_cast<long>(n) + 256;
  long matvecs = 0;
  EigPair best;
  best.value = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar best_residual = std::numeric_limits<Scalar>::infinity();

  while (matvecs < cap) {
    const Index krylov = std::min<Index>(n, 256);
    Matrix V(n, krylov);
    Vector alpha = Vector::Zero(krylov);
    Vector beta = Vector::Zero(krylov);
    V.col(0) = start;
    Index built = 0;
    bool breakdown = false;

    for (Index j = 0; j < krylov; ++j) {
      Vector w = op(V.col(j));
      ++matvecs;
      alpha[j] = V.col(j).dot(w);
      w -= alpha[j] * V.col(j);
      if (j > 0) w -= beta[j - 1] * V.col(j - 1);
      // full reorthogonalization, two passes
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      built = j + 1;
      beta[j] = w.norm();
      if (beta[j] <= 1e-14 * scale) {
        breakdown = true;  // invariant subspace: Ritz pairs are exact
        break;
      }
      if (j + 1 < krylov) V.col(j + 1) = w / beta[j];
    }

    Matrix T = Matrix::Zero(built, built);
    for (Index j = 0; j < built; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < built) {
        T(j, j + 1) = beta[j];
        T(j + 1, j) = beta[j];
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(T);
    const Index top = built - 1;  // largest Ritz value of sigma I - S
    const Scalar theta = es.eigenvalues()[top];
    Vector v = V.leftCols(built) * es.eigenvectors().col(top);
    v.normalize();

    const Scalar eig = sigma - theta;
    const Vector resid = S.apply(v) - eig * v;
    ++matvecs;
    const Scalar rnorm = resid.norm();
    if (rnorm < best_residual) {
      best_residual = rnorm;
      best.value = eig;
      best.vector = v;
    }
    if (rnorm <= tol * scale) return best;
    if (breakdown) return best;  // exact invariant subspace; nothing better exists
    start = v;  // restart from the current Ritz vector
  }

  throw EigSolveError("min_eigpair: iteration cap reached before convergence", best);
}

Scalar default_certificate_epsilon(const SparseSymMatrix& S) {
  const Vector d = S.diagonal();
  const Scalar dmax = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
  return 1e-10 * (1.0 + dmax);
}

CertificateResult certify(const QcqpProblem& p, const Matrix& Y, Scalar eps,
                          std::uint64_t seed) {
  const MultiplierSolution ms = compute_multipliers(p, Y);
  const SparseSymMatrix S = build_certificate(p, ms.lambda);

  CertificateResult res;
  res.lambda = ms.lambda;
  res.stationarity_residual = ms.stationarity_residual;
  res.multiplier_rank_deficient = ms.rank_deficient;
  res.epsilon_used = eps > 0 ? eps : default_certificate_epsilon(S);
  res.psd = psd_check(S, res.epsilon_used);
  if (!res.psd) {
    const EigPair pair = min_eigpair(S, 1e-8, seed != 0 ? seed : 1);
    res.min_eig = pair.value;
    res.min_eigvec = pair.vector;
  }
  return res;
}

}  // namespace bmstair
