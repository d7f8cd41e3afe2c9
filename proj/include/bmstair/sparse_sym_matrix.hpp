#pragma once

#include "bmstair/types.hpp"

#include <vector>

namespace bmstair {

/// One entry of a symmetric sparse matrix; (row, col) with row > col is
/// mirrored into the upper triangle during assembly.
struct Triplet {
  Index row = 0;
  Index col = 0;
  Scalar value = 0.0;
};

/// Symmetric sparse matrix stored as its compressed upper triangle.
/// Duplicate (row, col) pairs sum during assembly; products act through the
/// self-adjoint view so symmetry is structural rather than numerical.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  explicit SparseSymMatrix(Index n);

  static SparseSymMatrix from_triplets(Index n, const std::vector<Triplet>& entries);

  Index dim() const { return n_; }
  Index nonzeros() const { return upper_.nonZeros(); }

  /// Compressed upper triangle (row <= col).
  const SparseMatrix& upper() const { return upper_; }

  /// Upper-triangle entries, sorted by (col, row), duplicates merged.
  std::vector<Triplet> entries() const;

  /// y = A x with the symmetric expansion of the stored triangle. Columns are
  /// independent and may be split across threads (same result either way).
  Matrix apply(const Matrix& x) const;
  Vector apply(const Vector& x) const;

  Vector diagonal() const;

  /// Largest |entry| (0 for an empty matrix); used for scale-relative tolerances.
  Scalar max_abs() const;

  /// Gershgorin upper bound on lambda_max.
  Scalar gershgorin_upper() const;

  /// max_i sum_j |A_ij|: an upper bound on the spectral radius.
  Scalar gershgorin_scale() const;

  /// Full dense symmetric copy (small matrices and test oracles only).
  Matrix dense() const;

 private:
  Index n_ = 0;
  SparseMatrix upper_;
};

/// Tr(A^T B) = sum_ij A_ij B_ij for symmetric A.
Scalar inner(const SparseSymMatrix& a, const SparseSymMatrix& b);
Scalar inner(const SparseSymMatrix& a, const Matrix& b);

}  // namespace bmstair
