#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bmstair/manifold.hpp"
#include "bmstair/problem.hpp"
#include "bmstair/rng.hpp"

#include "oracles.hpp"

#include <Eigen/Dense>

using namespace bmstair;

namespace {

SparseSymMatrix sym2x2(Scalar a, Scalar b, Scalar c) {
  return SparseSymMatrix::from_triplets(2, {{0, 0, a}, {0, 1, b}, {1, 1, c}});
}

QcqpProblem sphere_problem(Scalar q, Index k = 1) {
  return QcqpProblem(SparseSymMatrix::from_triplets(1, {{0, 0, q}}),
                     ManifoldSpec({{BlockKind::Stiefel, 1}}), k);
}

}  // namespace

TEST_CASE("inner products") {
  const SparseSymMatrix I2 = sym2x2(1, 0, 1);
  CHECK(inner(I2, I2) == doctest::Approx(2.0));

  const SparseSymMatrix zero(2);
  CHECK(inner(zero, sym2x2(3, -1, 7)) == 0.0);

  const SparseSymMatrix A = sym2x2(1, 2, 3);
  const SparseSymMatrix B = sym2x2(2, 0, 1);
  const Matrix Ad = oracle::dense_from_triplets(2, {{0, 0, 1}, {0, 1, 2}, {1, 1, 3}});
  const Matrix Bd = oracle::dense_from_triplets(2, {{0, 0, 2}, {1, 1, 1}});
  const Scalar expected = oracle::dense_inner(Ad, Bd);
  CHECK(expected == doctest::Approx(5.0));
  CHECK(inner(A, B) == doctest::Approx(expected));
  CHECK(inner(A, Bd) == doctest::Approx(expected));

  CHECK_THROWS_AS(inner(A, SparseSymMatrix(3)), InvalidArgument);
}

TEST_CASE("sparse symmetric assembly: duplicates sum, lower mirrors, symmetry") {
  // duplicates and a lower-triangle entry for the same slot
  const SparseSymMatrix A =
      SparseSymMatrix::from_triplets(3, {{0, 1, 1.0}, {1, 0, 2.0}, {2, 2, 5.0}, {0, 1, -0.5}});
  CHECK(A.nonzeros() == 2);
  const Matrix D = A.dense();
  CHECK(D(0, 1) == doctest::Approx(2.5));
  CHECK(D(1, 0) == doctest::Approx(2.5));

  Rng rng(3);
  const auto trips = oracle::random_triplets(12, 0.4, rng);
  const SparseSymMatrix S = SparseSymMatrix::from_triplets(12, trips);
  const Matrix Sd = oracle::dense_from_triplets(12, trips);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x(12), z(12);
    for (Index i = 0; i < 12; ++i) {
      x[i] = rng.normal();
      z[i] = rng.normal();
    }
    // <Ax, z> == <x, Az> to 1e-12 relative
    const Scalar left = S.apply(x).dot(z);
    const Scalar right = x.dot(S.apply(z));
    CHECK(std::abs(left - right) <= 1e-12 * std::max(1.0, std::abs(left)));
    CHECK(S.apply(x).isApprox(Sd * x, 1e-13));
  }

  CHECK_THROWS_AS(SparseSymMatrix::from_triplets(2, {{0, 2, 1.0}}), InvalidArgument);
}

TEST_CASE("threaded products match the sequential path bitwise") {
  Rng rng(64);
  const Index n = 600;
  const auto trips = oracle::random_triplets(n, 0.4, rng);  // well past the split threshold
  const SparseSymMatrix S = SparseSymMatrix::from_triplets(n, trips);
  Matrix X(n, 4);
  for (Index i = 0; i < X.size(); ++i) X(i) = rng.normal();

  set_thread_cap(1);
  const Matrix sequential = S.apply(X);
  set_thread_cap(4);
  const Matrix threaded = S.apply(X);
  set_thread_cap(1);
  CHECK((sequential.array() == threaded.array()).all());
}

TEST_CASE("objective") {
  SUBCASE("identity data over fully Stiefel rows gives n") {
    const ManifoldSpec spec({{BlockKind::Stiefel, 2}, {BlockKind::Stiefel, 1}});
    const Index n = spec.total_dim();
    std::vector<Triplet> eye;
    for (Index i = 0; i < n; ++i) eye.push_back({i, i, 1.0});
    QcqpProblem p(SparseSymMatrix::from_triplets(n, eye), spec, 2);
    const Matrix Y = random_point(spec, 3, 5);
    CHECK(objective(p, Y) == doctest::Approx(static_cast<Scalar>(n)));
  }
  SUBCASE("zero data matrix") {
    QcqpProblem p(SparseSymMatrix(2), ManifoldSpec({{BlockKind::Stiefel, 1}, {BlockKind::Stiefel, 1}}), 1);
    CHECK(objective(p, random_point(p.spec(), 1, 9)) == 0.0);
  }
  SUBCASE("sphere pair against the dense trace oracle") {
    QcqpProblem p(sym2x2(1, -1, 1),
                  ManifoldSpec({{BlockKind::Stiefel, 1}, {BlockKind::Stiefel, 1}}), 1);
    Matrix Y(2, 1);
    Y << 1, 1;
    const Matrix Qd = oracle::dense_from_triplets(2, {{0, 0, 1}, {0, 1, -1}, {1, 1, 1}});
    const Scalar expected = (Qd.transpose() * (Y * Y.transpose())).trace();
    CHECK(expected == doctest::Approx(0.0));
    CHECK(objective(p, Y) == doctest::Approx(expected));
  }
}

TEST_CASE("synthesize_constraints") {
  SUBCASE("stiefel plus euclidean") {
    const auto cons = synthesize_constraints(ManifoldSpec({{BlockKind::Stiefel, 2},
                                                           {BlockKind::Euclidean, 3}}),
                                             2);
    REQUIRE(cons.size() == 3);
    CHECK(cons[0].b == 1.0);
    CHECK(cons[1].b == 0.0);
    CHECK(cons[2].b == 1.0);
  }
  SUBCASE("euclidean only emits nothing") {
    CHECK(synthesize_constraints(ManifoldSpec({{BlockKind::Euclidean, 5}}), 3).empty());
  }
  SUBCASE("two spheres") {
    const auto cons = synthesize_constraints(ManifoldSpec({{BlockKind::Stiefel, 1},
                                                           {BlockKind::Stiefel, 1}}),
                                             1);
    REQUIRE(cons.size() == 2);
    CHECK(cons[0].b == 1.0);
    CHECK(cons[1].b == 1.0);
    CHECK(cons[0].A.dense()(0, 0) == 1.0);
    CHECK(cons[0].A.dense()(1, 1) == 0.0);
    CHECK(cons[1].A.dense()(1, 1) == 1.0);
  }
  SUBCASE("infeasible rank") {
    CHECK_THROWS_AS(synthesize_constraints(ManifoldSpec({{BlockKind::Stiefel, 3}}), 2),
                    InvalidArgument);
  }
}

TEST_CASE("constraint_residuals") {
  const ManifoldSpec spec({{BlockKind::Stiefel, 2}});
  QcqpProblem p(SparseSymMatrix(2), spec, 2);

  SUBCASE("feasible points sit on the constraints") {
    const Matrix Y = random_point(spec, 3, 17);
    CHECK(constraint_residuals(p, Y).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("doubling a sphere row gives residual 3") {
    QcqpProblem sphere = sphere_problem(1.0);
    Matrix Y(1, 1);
    Y << 2.0;
    CHECK(constraint_residuals(sphere, Y)[0] == doctest::Approx(3.0));
  }
  SUBCASE("random infeasible point matches the dense B B^T - I evaluation") {
    Rng rng(23);
    Matrix Y(2, 3);
    for (Index i = 0; i < Y.size(); ++i) Y(i) = rng.normal();
    const Matrix G = Y * Y.transpose() - Matrix::Identity(2, 2);
    const Vector res = constraint_residuals(p, Y);
    // order (0,0), (0,1), (1,1)
    CHECK(res[0] == doctest::Approx(G(0, 0)));
    CHECK(res[1] == doctest::Approx(G(0, 1)));
    CHECK(res[2] == doctest::Approx(G(1, 1)));
  }
}

TEST_CASE("licq_check") {
  SUBCASE("single sphere holds") {
    QcqpProblem p = sphere_problem(1.0);
    Matrix Y(1, 2);
    Y << 1, 0;
    const LicqReport rep = licq_check(p, Y);
    CHECK(rep.jacobian_rank == 1);
    CHECK(rep.m == 1);
    CHECK(rep.holds);
    CHECK(rep.tolerance_used > 0);
  }
  SUBCASE("duplicated sphere constraint fails with rank m-1") {
    auto cons = synthesize_constraints(ManifoldSpec({{BlockKind::Stiefel, 1}}), 1);
    cons.push_back(cons[0]);
    QcqpProblem p(SparseSymMatrix::from_triplets(1, {{0, 0, 1.0}}),
                  ManifoldSpec({{BlockKind::Stiefel, 1}}), 1, cons);
    Matrix Y(1, 2);
    Y << 1, 0;
    const LicqReport rep = licq_check(p, Y);
    CHECK(rep.jacobian_rank == 1);
    CHECK(rep.m == 2);
    CHECK_FALSE(rep.holds);
  }
  SUBCASE("Stiefel(2) at rank 3 matches the explicit SVD oracle") {
    const ManifoldSpec spec({{BlockKind::Stiefel, 2}});
    QcqpProblem p(SparseSymMatrix(2), spec, 2);
    const Matrix Y = random_point(spec, 3, 99);
    const LicqReport rep = licq_check(p, Y);

    Matrix jac(3, 6);
    for (Index i = 0; i < 3; ++i) {
      const Matrix g =
          2.0 * oracle::dense_from_triplets(
                    2, p.constraints()[static_cast<std::size_t>(i)].A.entries()) *
          Y;
      jac.row(i) = Eigen::Map<const Vector>(g.data(), 6);
    }
    Eigen::JacobiSVD<Matrix> svd(jac);
    Index oracle_rank = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > 1e-10) ++oracle_rank;
    CHECK(oracle_rank == 3);
    CHECK(rep.jacobian_rank == oracle_rank);
    CHECK(rep.holds);
  }
  SUBCASE("no constraints is an error") {
    QcqpProblem p(SparseSymMatrix(2), ManifoldSpec({{BlockKind::Euclidean, 2}}), 1);
    CHECK_THROWS_AS(licq_check(p, Matrix::Zero(2, 1)), InvalidArgument);
  }
}

TEST_CASE("property: constraint/manifold consistency on random specs") {
  Rng rng(2024);
  int samples = 0;
  while (samples < 100) {
    const ManifoldSpec spec = oracle::random_spec(rng);
    const Index r = spec.max_stiefel_dim() + static_cast<Index>(rng.integer(3));
    QcqpProblem p(SparseSymMatrix(spec.total_dim()), spec, spec.max_stiefel_dim());
    for (int rep = 0; rep < 5 && samples < 100; ++rep, ++samples) {
      const Matrix Y = random_point(spec, r, rng.integer(1'000'000));
      if (p.num_constraints() == 0) continue;
      CHECK(constraint_residuals(p, Y).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("property: constraint Jacobian rows match finite differences") {
  Rng rng(7);
  const ManifoldSpec spec({{BlockKind::Stiefel, 2}, {BlockKind::Euclidean, 1}});
  QcqpProblem p(SparseSymMatrix(3), spec, 2);
  const Index r = 3;
  const Matrix Y = random_point(spec, r, 4);

  for (Index i = 0; i < p.num_constraints(); ++i) {
    const auto& c = p.constraints()[static_cast<std::size_t>(i)];
    const Matrix row = 2.0 * c.A.apply(Y);  // gradient of <A_i, Y Y^T>
    for (int dir = 0; dir < 5; ++dir) {
      Matrix E(Y.rows(), Y.cols());
      for (Index q = 0; q < E.size(); ++q) E(q) = rng.normal();
      const auto value = [&](Scalar t) {
        const Matrix Yt = Y + t * E;
        return bmstair::dot(Yt, c.A.apply(Yt));
      };
      const Scalar fd = oracle::central_difference(value, 1e-6);
      const Scalar an = bmstair::dot(row, E);
      CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("property: LICQ rank is invariant under right-orthogonal transforms") {
  Rng rng(31);
  const ManifoldSpec spec({{BlockKind::Stiefel, 2}, {BlockKind::Stiefel, 1}});
  QcqpProblem p(SparseSymMatrix(3), spec, 2);
  const Index r = 3;
  const Matrix Y = random_point(spec, r, 15);

  Matrix G(r, r);
  for (Index i = 0; i < G.size(); ++i) G(i) = rng.normal();
  const Matrix O = Eigen::HouseholderQR<Matrix>(G).householderQ();

  const LicqReport a = licq_check(p, Y);
  const LicqReport b = licq_check(p, Matrix(Y * O));
  CHECK(a.jacobian_rank == b.jacobian_rank);
}

TEST_CASE("property: synthesized Stiefel constraints satisfy LICQ at feasible points") {
  Rng rng(77);
  for (int s = 0; s < 4; ++s) {
    const ManifoldSpec spec = oracle::random_spec(rng);
    const Index r = spec.max_stiefel_dim() + 1;
    QcqpProblem p(SparseSymMatrix(spec.total_dim()), spec, spec.max_stiefel_dim());
    if (p.num_constraints() == 0) continue;
    for (int t = 0; t < 25; ++t) {
      const Matrix Y = random_point(spec, r, rng.integer(1'000'000));
      CHECK(licq_check(p, Y).holds);
    }
  }
}
