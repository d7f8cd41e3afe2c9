#pragma once

#include "bmstair/certify.hpp"
#include "bmstair/problem.hpp"
#include "bmstair/rtr.hpp"
#include "bmstair/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bmstair {

struct StaircaseOptions {
  Index r0 = 0;      // 0: start at the QCQP rank k
  Index r_max = 0;   // 0: smallest r with r(r+1)/2 > m, capped at n
  Scalar eps_cert = 0.0;  // <= 0: scale-relative default
  Scalar escape_t0 = 1.0;
  int escape_backtracks = 30;
  RtrOptions rtr;
};

/// Appends one zero column: same Y Y^T, same objective, same residuals.
Matrix lift(const Matrix& Y);

struct EscapeOutcome {
  bool descended = false;
  Matrix Y;
  Scalar step = 0.0;
  std::string diagnostic;
};

/// Second-order escape from a certification failure: places the negative
/// eigenvector v of the certificate matrix (eigenvalue nu < 0) into the new
/// last column of the lifted point, projects to the tangent space, and
/// backtracks t = t0, t0/2, ... until f(retract(t V)) < f - t^2 |nu| / 4.
EscapeOutcome escape_step(const QcqpProblem& p, const Matrix& Y_lifted, const Vector& v,
                          Scalar nu, const StaircaseOptions& opts);

struct RoundedSolution {
  Matrix X;  // feasible n x k factor
  Scalar f_qcqp = 0.0;
  Scalar gap = 0.0;
  Scalar gap_relative = 0.0;
  bool exact = false;
};

/// Extracts a rank-k feasible candidate from a BM solution: thin SVD of
/// Y_star keeps the k leading components, then each Stiefel block is snapped
/// to its polar factor. The gap f(X) - f(Y_star) bounds the rounded
/// solution's suboptimality when Y_star is certified.
RoundedSolution round_solution(const QcqpProblem& p, const Matrix& Y_star);

/// gap = f_rounded - f_bm_certified; gap_relative = gap / max(1, |f_bm|).
std::pair<Scalar, Scalar> suboptimality(Scalar f_rounded, Scalar f_bm_certified);

struct StageTrace {
  Index rank = 0;
  Scalar objective = 0.0;
  bool certified = false;
  int outer_iterations = 0;
  long tcg_iterations = 0;
  RtrTermination termination = RtrTermination::MaxIterations;
  Scalar solve_seconds = 0.0;
  Scalar certify_seconds = 0.0;
};

struct StaircaseResult {
  Matrix Y_star;
  Scalar f_bm = 0.0;
  bool certified = false;
  CertificateResult certificate;
  std::vector<StageTrace> rank_trace;
  RoundedSolution rounded;
  Index numerical_rank = 0;  // singular values of Y_star above 1e-6 * sigma_1
  std::string stop_reason;
};

/// The Riemannian Staircase: solve the rank-r problem, certify, and either
/// stop (certificate holds) or lift one rank and escape along the negative
/// eigenvector, until r_max. Uncertified termination is a valid result and
/// still carries the rounding output and suboptimality bound.
StaircaseResult run_staircase(const QcqpProblem& p, const StaircaseOptions& opts,
                              const std::optional<Matrix>& Y0 = std::nullopt);

/// Count of singular values above 1e-6 * sigma_max.
Index numerical_rank(const Matrix& Y);

}  // namespace bmstair
