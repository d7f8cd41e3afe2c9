#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bmstair/io.hpp"
#include "bmstair/rtr.hpp"
#include "bmstair/rotation_sync.hpp"

#include "instances.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace bmstair;

namespace {

LinearOp matrix_op(const Matrix& H) {
  return [H](const Matrix& v) -> Matrix { return H * v; };
}

Scalar model_value(const Matrix& g, const LinearOp& hess, const Matrix& s) {
  return dot(g, s) + 0.5 * dot(s, hess(s));
}

}  // namespace

TEST_CASE("tcg: identity Hessian solves in one iteration") {
  Rng rng(1);
  Matrix g(2, 3);
  for (Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  const LinearOp H = [](const Matrix& v) { return v; };
  const TcgResult res = tcg(g, H, nullptr, 1e9, 0.1, 1.0, 100);
  CHECK(res.iterations == 1);
  CHECK_FALSE(res.hit_boundary);
  CHECK((res.step + g).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("tcg: negative curvature runs to the boundary") {
  Rng rng(2);
  Matrix g(4, 1);
  for (Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  const LinearOp H = [](const Matrix& v) -> Matrix { return -v; };
  const Scalar delta = 0.37;
  const TcgResult res = tcg(g, H, nullptr, delta, 0.1, 1.0, 100);
  CHECK(res.hit_boundary);
  CHECK(res.step.norm() == doctest::Approx(delta));
  // the step follows the steepest-descent ray
  CHECK((res.step.normalized() + g.normalized()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("tcg: SPD model matches the dense Newton solve") {
  Rng rng(3);
  Matrix A(6, 6);
  for (Index i = 0; i < A.size(); ++i) A(i) = rng.normal();
  const Eigen::HouseholderQR<Matrix> qr(A);
  const Matrix Q = qr.householderQ();
  Vector ev(6);
  for (Index i = 0; i < 6; ++i) ev[i] = 0.5 + 1.5 * rng.uniform();
  const Matrix H = Q * ev.asDiagonal() * Q.transpose();

  Matrix g(6, 1);
  for (Index i = 0; i < 6; ++i) g(i) = rng.normal();
  g *= 1e-4 / g.norm();

  const TcgResult res = tcg(g, matrix_op(H), nullptr, 1e9, 0.1, 1.0, 200);
  const Matrix newton = -H.ldlt().solve(Matrix(g)).eval();
  CHECK((res.step - newton).norm() <= 1e-6);
}

TEST_CASE("tcg: never worse than the preconditioned Cauchy point") {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 8;
    Matrix B(n, n);
    for (Index i = 0; i < B.size(); ++i) B(i) = rng.normal();
    const Matrix H = 0.5 * (B + B.transpose());  // usually indefinite

    Vector dprec(n);
    for (Index i = 0; i < n; ++i) dprec[i] = 0.2 + 2.0 * rng.uniform();
    const LinearOp P = [dprec](const Matrix& v) -> Matrix {
      return dprec.asDiagonal() * v;
    };

    Matrix g(n, 1);
    for (Index i = 0; i < n; ++i) g(i) = rng.normal();
    const Scalar delta = 0.5;

    const TcgResult res = tcg(g, matrix_op(H), &P, delta, 0.1, 1.0, 200);

    // Cauchy point along -P g, constrained in the preconditioned norm:
    // |t z0|_M = t sqrt(<z0, g>).
    const Matrix z0 = P(g);
    const Scalar zg = dot(z0, g);
    const Scalar t_boundary = delta / std::sqrt(zg);
    const Scalar curvature = dot(z0, matrix_op(H)(z0));
    Scalar t_star = t_boundary;
    if (curvature > 0) t_star = std::min(t_boundary, zg / curvature);
    const Scalar cauchy_value = model_value(g, matrix_op(H), Matrix(-t_star * z0));
    CHECK(model_value(g, matrix_op(H), res.step) <= cauchy_value + 1e-12);
  }
}

TEST_CASE("tcg: rejects bad inputs") {
  const LinearOp H = [](const Matrix& v) { return v; };
  CHECK_THROWS_AS(tcg(Matrix::Zero(2, 1), H, nullptr, 1.0, 0.1, 1.0, 10), InvalidArgument);
  Matrix g(2, 1);
  g << 1, 0;
  CHECK_THROWS_AS(tcg(g, H, nullptr, 0.0, 0.1, 1.0, 10), InvalidArgument);
}

TEST_CASE("solve_rtr: zero data terminates at the start point") {
  const ManifoldSpec spec({{BlockKind::Stiefel, 2}});
  QcqpProblem p(SparseSymMatrix(2), spec, 2);
  const Matrix Y0 = random_point(spec, 3, 7);
  const auto [Y, stats] = solve_rtr(p, 3, Y0, RtrOptions{});
  CHECK(stats.outer_iterations == 0);
  CHECK(stats.termination == RtrTermination::GradientTol);
  CHECK((Y.array() == Y0.array()).all());
}

TEST_CASE("solve_rtr: constant objective on a single sphere row") {
  QcqpProblem p(SparseSymMatrix::from_triplets(1, {{0, 0, 4.2}}),
                ManifoldSpec({{BlockKind::Stiefel, 1}}), 1);
  const Matrix Y0 = random_point(p.spec(), 2, 5);
  const auto [Y, stats] = solve_rtr(p, 2, Y0, RtrOptions{});
  CHECK(stats.termination == RtrTermination::GradientTol);
  CHECK(stats.outer_iterations == 0);
}

TEST_CASE("solve_rtr: zero-noise triangle reaches the ground-truth cost") {
  RotationSyncOptions gen;
  gen.num_rotations = 3;
  gen.d = 2;
  gen.graph = GraphKind::Cycle;
  gen.noise_sigma = 0.0;
  gen.seed = 12;
  const auto inst = generate_rotation_sync(gen);
  QcqpProblem p = make_problem(inst.problem);

  const Matrix Y0 = random_point(p.spec(), 2, 3);
  const auto [Y, stats] = solve_rtr(p, 2, Y0, RtrOptions{});
  CHECK(stats.termination == RtrTermination::GradientTol);
  CHECK(objective(p, Y) <= 1e-8);
  CHECK(feasibility_error(p.spec(), Y) <= 1e-10);

  // accepted objectives never increase
  for (std::size_t i = 1; i < stats.objective_trace.size(); ++i)
    CHECK(stats.objective_trace[i] <= stats.objective_trace[i - 1]);
}

TEST_CASE("solve_rtr: determinism of the iterate trace") {
  RotationSyncOptions gen;
  gen.num_rotations = 6;
  gen.d = 2;
  gen.graph = GraphKind::Cycle;
  gen.noise_sigma = 0.2;
  gen.seed = 9;
  const auto inst = generate_rotation_sync(gen);
  QcqpProblem p = make_problem(inst.problem);
  const Matrix Y0 = random_point(p.spec(), 2, 31);

  const auto [Ya, sa] = solve_rtr(p, 2, Y0, RtrOptions{});
  const auto [Yb, sb] = solve_rtr(p, 2, Y0, RtrOptions{});
  REQUIRE(sa.objective_trace.size() == sb.objective_trace.size());
  for (std::size_t i = 0; i < sa.objective_trace.size(); ++i)
    CHECK(sa.objective_trace[i] == sb.objective_trace[i]);
  CHECK((Ya.array() == Yb.array()).all());
  CHECK(sa.total_tcg_iterations == sb.total_tcg_iterations);
}

TEST_CASE("solve_rtr: preconditioning reduces inner iterations on a stiff chain") {
  RotationSyncOptions gen;
  gen.num_rotations = 30;
  gen.d = 2;
  gen.graph = GraphKind::Chain;
  gen.noise_sigma = 0.0;
  gen.weight_spread = 1e4;
  gen.seed = 20;
  const auto inst = generate_rotation_sync(gen);
  QcqpProblem p = make_problem(inst.problem);
  const Matrix Y0 = random_point(p.spec(), 2, 77);

  RtrOptions with = {};
  with.use_preconditioner = true;
  RtrOptions without = {};
  without.use_preconditioner = false;

  const auto [Yw, sw] = solve_rtr(p, 2, Y0, with);
  const auto [Yo, so] = solve_rtr(p, 2, Y0, without);
  CHECK(sw.total_tcg_iterations <= so.total_tcg_iterations);
}

TEST_CASE("solve_rtr: input validation") {
  const ManifoldSpec spec({{BlockKind::Stiefel, 2}});
  QcqpProblem p(SparseSymMatrix(2), spec, 2);

  Matrix bad = 2.0 * random_point(spec, 2, 1);
  CHECK_THROWS_AS(solve_rtr(p, 2, bad, RtrOptions{}), InvalidArgument);

  RtrOptions opts;
  opts.rho_accept = 0.5;  // outside (0, 1/4)
  CHECK_THROWS_AS(solve_rtr(p, 2, random_point(spec, 2, 1), opts), InvalidArgument);

  QcqpProblem nan_problem(
      SparseSymMatrix::from_triplets(2, {{0, 0, std::numeric_limits<Scalar>::quiet_NaN()}}),
      spec, 2);
  CHECK_THROWS_AS(solve_rtr(nan_problem, 2, random_point(spec, 2, 1), RtrOptions{}),
                  NumericalError);
}
