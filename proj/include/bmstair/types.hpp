#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace bmstair {

using Scalar = double;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<Scalar>;

/// Inputs with incompatible shapes or violated preconditions.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure that cannot complete (singular retraction,
/// non-finite objective, oversized dense fallback, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Frobenius inner product of equally sized dense matrices.
inline Scalar dot(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

/// Internal parallelism cap. Defaults to BM_STAIRCASE_THREADS (1 when unset,
/// which is the deterministic mode). Per-column work splits are deterministic
/// regardless of the cap; the env var only bounds thread usage.
int thread_cap();

/// Overrides the env-derived cap for this process (used by --deterministic).
void set_thread_cap(int cap);

}  // namespace bmstair
