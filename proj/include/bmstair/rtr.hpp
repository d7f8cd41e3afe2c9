#pragma once

#include "bmstair/manifold.hpp"
#include "bmstair/problem.hpp"
#include "bmstair/types.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace bmstair {

struct RtrOptions {
  Scalar grad_tol = 1e-8;     // stop when |rgrad| <= grad_tol * max(1, |f|)
  int max_outer = 1000;
  Scalar delta0 = 0.0;        // <= 0: 0.1 * sqrt(n * r)
  Scalar delta_max = 0.0;     // <= 0: 10 * delta0
  Scalar rho_accept = 0.1;    // must lie in (0, 1/4)
  Scalar tcg_kappa = 0.1;     // in (0, 1)
  Scalar tcg_theta = 1.0;     // in (0, 1]
  int tcg_max_iterations = 0; // 0: n * r
  bool use_preconditioner = true;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class RtrTermination { GradientTol, MaxIterations, RadiusCollapse };

const char* to_string(RtrTermination t);

struct RtrStats {
  int outer_iterations = 0;
  long total_tcg_iterations = 0;
  std::vector<Scalar> objective_trace;  // initial value plus each accepted step
  Scalar final_grad_norm = 0.0;
  RtrTermination termination = RtrTermination::MaxIterations;
};

using LinearOp = std::function<Matrix(const Matrix&)>;

struct TcgResult {
  Matrix step;
  bool hit_boundary = false;
  int iterations = 0;
};

/// Steihaug-Toint truncated conjugate gradient on the trust-region model
/// m(s) = <grad, s> + 1/2 <s, H s>, with inner products preconditioned by
/// `precond` (pass nullptr for the identity). The ball |s| <= delta is
/// measured in the preconditioned norm. Terminates on the superlinear
/// residual rule |r_j| <= |r_0| min(kappa, |r_0|^theta), on negative
/// curvature, or at the boundary; the step never does worse than the best
/// preconditioned-gradient (Cauchy) step.
TcgResult tcg(const Matrix& grad, const LinearOp& hess, const LinearOp* precond,
              Scalar delta, Scalar kappa, Scalar theta, int max_iterations);

/// Riemannian trust-region loop: every iterate stays feasible, accepted steps
/// never increase the objective, and the radius shrinks x1/4 on poor model
/// agreement (rho < 1/4) and doubles (capped) when rho > 3/4 at the boundary.
/// Pass `precond` to reuse a factorization across solves; when null and
/// opts.use_preconditioner is set, one is built from the problem data.
std::pair<Matrix, RtrStats> solve_rtr(const QcqpProblem& p, Index r, const Matrix& Y0,
                                      const RtrOptions& opts,
                                      const Preconditioner* precond = nullptr);

}  // namespace bmstair
