#include "bmstair/rtr.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace bmstair {

void RtrOptions::validate() const {
  if (!(grad_tol > 0)) throw InvalidArgument("RtrOptions: grad_tol must be positive");
  if (max_outer < 0) throw InvalidArgument("RtrOptions: max_outer must be nonnegative");
  if (!(rho_accept > 0 && rho_accept < 0.25))
    throw InvalidArgument("RtrOptions: rho_accept must lie in (0, 1/4)");
  if (!(tcg_kappa > 0 && tcg_kappa < 1))
    throw InvalidArgument("RtrOptions: tcg_kappa must lie in (0, 1)");
  if (!(tcg_theta > 0 && tcg_theta <= 1))
    throw InvalidArgument("RtrOptions: tcg_theta must lie in (0, 1]");
  if (tcg_max_iterations < 0)
    throw InvalidArgument("RtrOptions: tcg_max_iterations must be nonnegative");
}

const char* to_string(RtrTermination t) {
  switch (t) {
    case RtrTermination::GradientTol: return "gradient_tol";
    case RtrTermination::MaxIterations: return "max_iterations";
    case RtrTermination::RadiusCollapse: return "radius_collapse";
  }
  return "unknown";
}

TcgResult tcg(const Matrix& grad, const LinearOp& hess, const LinearOp* precond,
              Scalar delta, Scalar kappa, Scalar theta, int max_iterations) {
  if (!(delta > 0)) throw InvalidArgument("tcg: delta must be positive");
  const Scalar r_norm0 = grad.norm();
  if (!(r_norm0 > 0)) throw InvalidArgument("tcg: gradient must be nonzero");

  Matrix s = Matrix::Zero(grad.rows(), grad.cols());
  Matrix r = grad;
  Matrix z = precond ? (*precond)(r) : r;
  Matrix d = -z;

  Scalar rz = dot(r, z);
  if (!(rz > 0)) throw NumericalError("tcg: preconditioner is not positive definite");

  // Norms in the preconditioned metric, tracked by recurrence: e_Pe = |s|^2,
  // e_Pd = <s, d>, d_Pd = |d|^2 (all in the M = P^{-1} inner product).
  Scalar e_Pe = 0.0;
  Scalar e_Pd = 0.0;
  Scalar d_Pd = rz;

  const Scalar target = r_norm0 * std::min(kappa, std::pow(r_norm0, theta));
  const Scalar delta2 = delta * delta;

  TcgResult out;
  int j = 0;
  while (j < max_iterations) {
    const Matrix Hd = hess(d);
    const Scalar d_Hd = dot(d, Hd);
    ++j;
    if (!std::isfinite(d_Hd)) throw NumericalError("tcg: non-finite curvature");

    const bool negative_curvature = d_Hd <= 0;
    const Scalar alpha = negative_curvature ? 0.0 : rz / d_Hd;
    const Scalar e_Pe_next =
        negative_curvature ? std::numeric_limits<Scalar>::infinity()
                           : e_Pe + 2.0 * alpha * e_Pd + alpha * alpha * d_Pd;

    if (negative_curvature || e_Pe_next >= delta2) {
      // Follow d to the trust-region boundary.
      const Scalar tau =
          (-e_Pd + std::sqrt(e_Pd * e_Pd + d_Pd * (delta2 - e_Pe))) / d_Pd;
      s += tau * d;
      out.hit_boundary = true;
      break;
    }

    s += alpha * d;
    e_Pe = e_Pe_next;
    r += alpha * Hd;
    if (r.norm() <= target) break;

    const Matrix z_next = precond ? (*precond)(r) : r;
    const Scalar rz_next = dot(r, z_next);
    if (!(rz_next > 0)) throw NumericalError("tcg: preconditioner is not positive definite");
    const Scalar beta = rz_next / rz;
    d = -z_next + beta * d;
    rz = rz_next;
    e_Pd = beta * (e_Pd + alpha * d_Pd);
    d_Pd = rz + beta * beta * d_Pd;
  }
  out.step = std::move(s);
  out.iterations = j;
  return out;
}

std::pair<Matrix, RtrStats> solve_rtr(const QcqpProblem& p, Index r, const Matrix& Y0,
                                      const RtrOptions& opts, const Preconditioner* precond) {
  opts.validate();
  const ManifoldSpec& spec = p.spec();
  if (!spec.feasible_rank(r))
    throw InvalidArgument("solve_rtr: rank too small for a Stiefel block");
  if (Y0.rows() != p.dim() || Y0.cols() != r)
    throw InvalidArgument("solve_rtr: Y0 has the wrong shape");
  if (feasibility_error(spec, Y0) > 1e-6)
    throw InvalidArgument("solve_rtr: Y0 is infeasible");

  std::unique_ptr<Preconditioner> owned;
  if (opts.use_preconditioner && precond == nullptr) {
    owned = std::make_unique<Preconditioner>(build_preconditioner(p));
    precond = owned.get();
  }
  if (!opts.use_preconditioner) precond = nullptr;

  const Index nr = p.dim() * r;
  const Scalar delta0 = opts.delta0 > 0 ? opts.delta0 : 0.1 * std::sqrt(static_cast<Scalar>(nr));
  const Scalar delta_max = opts.delta_max > 0 ? opts.delta_max : 10.0 * delta0;
  const int tcg_cap = opts.tcg_max_iterations > 0 ? opts.tcg_max_iterations
                                                  : static_cast<int>(nr);
  Scalar delta = delta0;

  Matrix Y = Y0;
  Scalar f = objective(p, Y);
  if (!std::isfinite(f)) throw NumericalError("solve_rtr: objective is not finite at Y0");

  Matrix G = egrad(p, Y);
  Matrix g = project_tangent(spec, Y, G);
  Scalar gnorm = g.norm();

  RtrStats stats;
  stats.objective_trace.push_back(f);

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  int outer = 0;
  for (;;) {
    if (gnorm <= opts.grad_tol * std::max(1.0, std::abs(f))) {
      stats.termination = RtrTermination::GradientTol;
      break;
    }
    if (outer >= opts.max_outer) {
      stats.termination = RtrTermination::MaxIterations;
      break;
    }
    ++outer;

    const LinearOp hess_op = [&](const Matrix& V) { return rhess_vec(p, Y, V, G); };
    LinearOp prec_op;
    if (precond != nullptr)
      prec_op = [&](const Matrix& V) { return precondition(*precond, spec, Y, V); };

    const TcgResult sub =
        tcg(g, hess_op, precond != nullptr ? &prec_op : nullptr, delta, opts.tcg_kappa,
            opts.tcg_theta, tcg_cap);
    stats.total_tcg_iterations += sub.iterations;

    const Scalar model_decrease = -(dot(g, sub.step) + 0.5 * dot(sub.step, hess_op(sub.step)));
    const Matrix Y_try = retract(spec, Y, sub.step);
    const Scalar f_try = objective(p, Y_try);
    if (!std::isfinite(f_try))
      throw NumericalError("solve_rtr: objective is not finite (malformed problem data?)");

    // rho guard avoids 0/0 when the model decrease reaches round-off scale.
    const Scalar guard = 1e3 * eps * std::max(1.0, std::abs(f));
    const Scalar rho = (f - f_try + guard) / (model_decrease + guard);
    const bool accept = rho > opts.rho_accept && f_try <= f;

    if (rho < 0.25 || !accept)
      delta *= 0.25;
    else if (rho > 0.75 && sub.hit_boundary)
      delta = std::min(2.0 * delta, delta_max);

    if (accept) {
      Y = Y_try;
      f = f_try;
      G = egrad(p, Y);
      g = project_tangent(spec, Y, G);
      gnorm = g.norm();
      stats.objective_trace.push_back(f);
    }

    if (delta < 1e-14 * delta0) {
      stats.termination = RtrTermination::RadiusCollapse;
      break;
    }
  }

  stats.outer_iterations = outer;
  stats.final_grad_norm = gnorm;
  return {std::move(Y), std::move(stats)};
}

}  // namespace bmstair
