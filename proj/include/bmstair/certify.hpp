#pragma once

#include "bmstair/problem.hpp"
#include "bmstair/types.hpp"

#include <cstdint>
#include <optional>

namespace bmstair {

struct MultiplierSolution {
  Vector lambda;
  Scalar stationarity_residual = 0.0;  // |sum_i lambda_i A_i Y + Q Y| / max(1, |Q Y|)
  bool rank_deficient = false;
};

/// Recovers Lagrange multipliers at a (near-)stationary Y by least squares on
/// the vectorized stationarity system sum_i lambda_i vec(A_i Y) = -vec(Q Y).
/// Solved via sparse normal equations with iterative refinement; when those
/// are singular or ill-conditioned (LICQ failure), falls back to a dense SVD
/// of the stacked system and returns the minimum-norm solution. The fallback
/// is a desk-scale diagnostic and throws beyond a size limit.
MultiplierSolution compute_multipliers(const QcqpProblem& p, const Matrix& Y);

/// Certificate matrix Q + sum_i lambda_i A_i (sparse sum, duplicates merged).
SparseSymMatrix build_certificate(const QcqpProblem& p, const Vector& lambda);

/// Attempts a sparse Cholesky factorization of S + eps I (fill-reducing
/// ordering); returns whether it succeeded. Requires eps > 0.
bool psd_check(const SparseSymMatrix& S, Scalar eps);

struct EigPair {
  Scalar value = 0.0;
  Vector vector;
};

/// Thrown when the eigensolver hits its iteration cap; carries the best
/// estimate found so far.
struct EigSolveError : NumericalError {
  EigSolveError(const std::string& msg, EigPair best)
      : NumericalError(msg), best_estimate(std::move(best)) {}
  EigPair best_estimate;
};

/// Algebraically smallest eigenpair of S via Lanczos with full
/// reorthogonalization on sigma I - S, sigma the Gershgorin upper bound of
/// lambda_max(S). Accepts when |S v - eig v| <= tol * (1 + |S|-scale);
/// iteration cap 10 n (restarted), then throws EigSolveError.
EigPair min_eigpair(const SparseSymMatrix& S, Scalar tol = 1e-8, std::uint64_t seed = 0);

/// Scale-relative default for the PSD-test shift: 1e-10 * (1 + max |S_ii|).
Scalar default_certificate_epsilon(const SparseSymMatrix& S);

struct CertificateResult {
  Vector lambda;
  Scalar stationarity_residual = 0.0;
  bool multiplier_rank_deficient = false;
  bool psd = false;
  Scalar epsilon_used = 0.0;
  std::optional<Scalar> min_eig;
  std::optional<Vector> min_eigvec;
};

/// Full certification chain at a stationary candidate Y: multipliers ->
/// certificate matrix -> PSD test; on failure also the minimum eigenpair
/// (the escape direction for the next staircase level). When the multiplier
/// system is rank deficient, a false PSD verdict is inconclusive (multipliers
/// are not unique); a true verdict still certifies. eps <= 0 selects the
/// scale-relative default, recorded in epsilon_used.
CertificateResult certify(const QcqpProblem& p, const Matrix& Y, Scalar eps = 0.0,
                          std::uint64_t seed = 0);

}  // namespace bmstair
