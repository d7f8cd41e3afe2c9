#include "bmstair/staircase.hpp"

#include "bmstair/manifold.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <memory>

namespace bmstair {

namespace {

using Clock = std::chrono::steady_clock;

Scalar seconds_since(Clock::time_point t0) {
  return std::chrono::duration<Scalar>(Clock::now() - t0).count();
}

Index default_r_max(Index m, Index n, Index r0) {
  Index r = 1;
  while (r * (r + 1) / 2 <= m && r < n) ++r;
  return std::max(r0, std::min(r, n));
}

}  // namespace

Matrix lift(const Matrix& Y) {
  Matrix out(Y.rows(), Y.cols() + 1);
  out.leftCols(Y.cols()) = Y;
  out.col(Y.cols()).setZero();
  return out;
}

EscapeOutcome escape_step(const QcqpProblem& p, const Matrix& Y_lifted, const Vector& v,
                          Scalar nu, const StaircaseOptions& opts) {
  if (!(nu < 0))
    throw InvalidArgument("escape_step: eigenvalue must be negative");
  if (v.size() != p.dim())
    throw InvalidArgument("escape_step: eigenvector has wrong length");
  if (Y_lifted.rows() != p.dim())
    throw InvalidArgument("escape_step: lifted point has wrong row count");

  const ManifoldSpec& spec = p.spec();
  Matrix direction = Matrix::Zero(Y_lifted.rows(), Y_lifted.cols());
  direction.col(Y_lifted.cols() - 1) = v;
  direction = project_tangent(spec, Y_lifted, direction);

  EscapeOutcome out;
  if (direction.norm() <= 1e-14 * std::max(1.0, v.norm())) {
    out.diagnostic = "escape direction projects to zero in the tangent space";
    return out;
  }

  const Scalar f0 = objective(p, Y_lifted);
  Scalar t = opts.escape_t0;
  for (int trial = 0; trial < opts.escape_backtracks; ++trial, t *= 0.5) {
    const Matrix Y_try = retract(spec, Y_lifted, t * direction);
    const Scalar f_try = objective(p, Y_try);
    if (f_try < f0 - 0.25 * t * t * std::abs(nu)) {
      out.descended = true;
      out.Y = Y_try;
      out.step = t;
      return out;
    }
  }
  out.diagnostic = "no second-order decrease found within the backtracking budget";
  return out;
}

RoundedSolution round_solution(const QcqpProblem& p, const Matrix& Y_star) {
  const Index k = p.intrinsic_rank();
  if (k > Y_star.cols())
    throw InvalidArgument("round_solution: Y_star has fewer columns than the QCQP rank");

  Eigen::BDCSVD<Matrix> svd(Y_star, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix X = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();

  const ManifoldSpec& spec = p.spec();
  for (std::size_t b = 0; b < spec.blocks().size(); ++b) {
    const Block& blk = spec.blocks()[b];
    if (blk.kind != BlockKind::Stiefel) continue;
    auto block = X.middleRows(spec.block_offset(b), blk.dim);
    Eigen::JacobiSVD<Matrix> bs(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
    block = bs.matrixU() * bs.matrixV().transpose();  // nearest orthonormal rows
  }

  RoundedSolution out;
  out.X = std::move(X);
  out.f_qcqp = objective(p, out.X);
  const Scalar f_bm = objective(p, Y_star);
  std::tie(out.gap, out.gap_relative) = suboptimality(out.f_qcqp, f_bm);
  out.exact = out.gap <= 1e-6 * std::max(1.0, std::abs(f_bm));
  return out;
}

std::pair<Scalar, Scalar> suboptimality(Scalar f_rounded, Scalar f_bm_certified) {
  const Scalar gap = f_rounded - f_bm_certified;
  return {gap, gap / std::max(1.0, std::abs(f_bm_certified))};
}

Index numerical_rank(const Matrix& Y) {
  Eigen::BDCSVD<Matrix> svd(Y);
  const Vector sigma = svd.singularValues();
  if (sigma.size() == 0 || sigma[0] <= 0) return 0;
  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > 1e-6 * sigma[0]) ++rank;
  return rank;
}

StaircaseResult run_staircase(const QcqpProblem& p, const StaircaseOptions& opts,
                              const std::optional<Matrix>& Y0) {
  const Index k = p.intrinsic_rank();
  const Index n = p.dim();
  const Index r0 = opts.r0 > 0 ? opts.r0 : k;
  const Index r_max =
      opts.r_max > 0 ? opts.r_max : default_r_max(p.num_constraints(), n, r0);
  if (r0 < k) throw InvalidArgument("run_staircase: r0 must be at least the QCQP rank k");
  if (r_max < r0) throw InvalidArgument("run_staircase: r_max must be at least r0");
  if (r_max > n) throw InvalidArgument("run_staircase: r_max must not exceed n");

  std::unique_ptr<Preconditioner> precond;
  if (opts.rtr.use_preconditioner)
    precond = std::make_unique<Preconditioner>(build_preconditioner(p));

  Index r = r0;
  Matrix Y;
  if (Y0.has_value()) {
    if (Y0->rows() != n || Y0->cols() != r0)
      throw InvalidArgument("run_staircase: initial point has the wrong shape");
    Y = *Y0;
  } else {
    Y = random_point(p.spec(), r0, opts.rtr.seed);
  }

  StaircaseResult result;
  for (;;) {
    StageTrace stage;
    stage.rank = r;

    auto t_solve = Clock::now();
    auto [Y_opt, stats] = solve_rtr(p, r, Y, opts.rtr, precond.get());
    stage.solve_seconds = seconds_since(t_solve);
    Y = std::move(Y_opt);

    auto t_cert = Clock::now();
    CertificateResult cert = certify(p, Y, opts.eps_cert, opts.rtr.seed + 1);
    stage.certify_seconds = seconds_since(t_cert);

    stage.objective = objective(p, Y);
    stage.certified = cert.psd;
    stage.outer_iterations = stats.outer_iterations;
    stage.tcg_iterations = stats.total_tcg_iterations;
    stage.termination = stats.termination;
    result.rank_trace.push_back(stage);
    result.certificate = std::move(cert);

    if (result.certificate.psd) {
      result.certified = true;
      result.stop_reason = "certified";
      break;
    }
    if (r >= r_max) {
      result.stop_reason = "rank cap reached without certification";
      break;
    }
    if (!result.certificate.min_eig.has_value() || !(*result.certificate.min_eig < 0)) {
      result.stop_reason = "certificate failed but no negative eigenpair was found";
      break;
    }

    const Matrix Y_lifted = lift(Y);
    const EscapeOutcome esc = escape_step(p, Y_lifted, *result.certificate.min_eigvec,
                                          *result.certificate.min_eig, opts);
    if (!esc.descended) {
      result.stop_reason = "no descent from the escape direction: " + esc.diagnostic;
      break;
    }
    Y = esc.Y;
    ++r;
  }

  result.Y_star = std::move(Y);
  result.f_bm = objective(p, result.Y_star);
  result.rounded = round_solution(p, result.Y_star);
  result.numerical_rank = numerical_rank(result.Y_star);
  return result;
}

}  // namespace bmstair
