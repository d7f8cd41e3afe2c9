#include "bmstair/sparse_sym_matrix.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace bmstair {

namespace {

int env_thread_cap() {
  const char* raw = std::getenv("BM_STAIRCASE_THREADS");
  if (raw == nullptr) return 1;
  const long parsed = std::strtol(raw, nullptr, 10);
  if (parsed < 1) return 1;
  return static_cast<int>(parsed);
}

int& thread_cap_storage() {
  static int cap = env_thread_cap();
  return cap;
}

}  // namespace

int thread_cap() { return thread_cap_storage(); }

void set_thread_cap(int cap) { thread_cap_storage() = cap < 1 ? 1 : cap; }

SparseSymMatrix::SparseSymMatrix(Index n) : n_(n), upper_(n, n) {
  if (n < 0) throw InvalidArgument("SparseSymMatrix: negative dimension");
}

SparseSymMatrix SparseSymMatrix::from_triplets(Index n, const std::vector<Triplet>& entries) {
  SparseSymMatrix out(n);
  std::vector<Eigen::Triplet<Scalar>> upper;
  upper.reserve(entries.size());
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
      throw InvalidArgument("SparseSymMatrix: triplet index out of range");
    const Index i = std::min(t.row, t.col);
    const Index j = std::max(t.row, t.col);
    upper.emplace_back(static_cast<int>(i), static_cast<int>(j), t.value);
  }
  out.upper_.setFromTriplets(upper.begin(), upper.end());  // sums duplicates
  out.upper_.makeCompressed();
  return out;
}

std::vector<Triplet> SparseSymMatrix::entries() const {
  std::vector<Triplet> out;
  out.reserve(static_cast<size_t>(upper_.nonZeros()));
  for (Index c = 0; c < upper_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(upper_, c); it; ++it)
      out.push_back({it.row(), it.col(), it.value()});
  return out;
}

Matrix SparseSymMatrix::apply(const Matrix& x) const {
  if (x.rows() != n_)
    throw InvalidArgument("SparseSymMatrix::apply: dimension mismatch");
  const int cap = thread_cap();
  const Index cols = x.cols();
  if (cap <= 1 || cols < 2 || upper_.nonZeros() < (1 << 16))
    return upper_.selfadjointView<Eigen::Upper>() * x;

  Matrix y(n_, cols);
  const int workers = static_cast<int>(std::min<Index>(cap, cols));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  const Index chunk = (cols + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Index begin = w * chunk;
    const Index width = std::min(chunk, cols - begin);
    if (width <= 0) break;
    pool.emplace_back([&, begin, width] {
      y.middleCols(begin, width) =
          upper_.selfadjointView<Eigen::Upper>() * x.middleCols(begin, width);
    });
  }
  for (std::thread& t : pool) t.join();
  return y;
}

Vector SparseSymMatrix::apply(const Vector& x) const {
  if (x.size() != n_)
    throw InvalidArgument("SparseSymMatrix::apply: dimension mismatch");
  return upper_.selfadjointView<Eigen::Upper>() * x;
}

Vector SparseSymMatrix::diagonal() const {
  Vector d = Vector::Zero(n_);
  for (Index c = 0; c < upper_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(upper_, c); it; ++it)
      if (it.row() == it.col()) d[it.row()] = it.value();
  return d;
}

Scalar SparseSymMatrix::max_abs() const {
  Scalar m = 0.0;
  for (Index c = 0; c < upper_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(upper_, c); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

Scalar SparseSymMatrix::gershgorin_upper() const {
  if (n_ == 0) return 0.0;
  Vector diag = Vector::Zero(n_);
  Vector radius = Vector::Zero(n_);
  for (Index c = 0; c < upper_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(upper_, c); it; ++it) {
      if (it.row() == it.col()) {
        diag[it.row()] = it.value();
      } else {
        radius[it.row()] += std::abs(it.value());
        radius[it.col()] += std::abs(it.value());
      }
    }
  return (diag + radius).maxCoeff();
}

Scalar SparseSymMatrix::gershgorin_scale() const {
  if (n_ == 0) return 0.0;
  Vector row_sum = Vector::Zero(n_);
  for (Index c = 0; c < upper_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(upper_, c); it; ++it) {
      row_sum[it.row()] += std::abs(it.value());
      if (it.row() != it.col()) row_sum[it.col()] += std::abs(it.value());
    }
  return row_sum.maxCoeff();
}

Matrix SparseSymMatrix::dense() const {
  const Matrix U = Matrix(upper_);
  Matrix D = U + U.transpose();
  D.diagonal() -= U.diagonal();
  return D;
}

Scalar inner(const SparseSymMatrix& a, const SparseSymMatrix& b) {
  if (a.dim() != b.dim())
    throw InvalidArgument("inner: dimension mismatch");
  // Both triangles are compressed and column-sorted; merge per column.
  const SparseMatrix& ua = a.upper();
  const SparseMatrix& ub = b.upper();
  Scalar total = 0.0;
  for (Index c = 0; c < ua.outerSize(); ++c) {
    SparseMatrix::InnerIterator ia(ua, c);
    SparseMatrix::InnerIterator ib(ub, c);
    while (ia && ib) {
      if (ia.row() == ib.row()) {
        const Scalar w = (ia.row() == c) ? 1.0 : 2.0;
        total += w * ia.value() * ib.value();
        ++ia;
        ++ib;
      } else if (ia.row() < ib.row()) {
        ++ia;
      } else {
        ++ib;
      }
    }
  }
  return total;
}

Scalar inner(const SparseSymMatrix& a, const Matrix& b) {
  if (b.rows() != a.dim() || b.cols() != a.dim())
    throw InvalidArgument("inner: dimension mismatch");
  Scalar total = 0.0;
  const SparseMatrix& ua = a.upper();
  for (Index c = 0; c < ua.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(ua, c); it; ++it) {
      if (it.row() == it.col())
        total += it.value() * b(it.row(), it.col());
      else
        total += it.value() * (b(it.row(), it.col()) + b(it.col(), it.row()));
    }
  return total;
}

}  // namespace bmstair
