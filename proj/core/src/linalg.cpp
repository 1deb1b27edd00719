#include "pontryagin/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>

namespace pontryagin::linalg {
namespace {

// Jacobi is the accurate choice for desk-scale sizes; BDC takes over for the
// large assembled constraint matrices of long horizons.
constexpr Index kJacobiLimit = 48;

template <int Options>
auto decompose(const Matrix& m) {
  if (std::min(m.rows(), m.cols()) <= kJacobiLimit) {
    return Eigen::JacobiSVD<Matrix>(m, Options).singularValues().eval();
  }
  return Eigen::BDCSVD<Matrix>(m, Options).singularValues().eval();
}

double cutoff(const Vector& sv, double rel_tol) {
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  return std::max(rel_tol * top, kSingularValueFloor);
}

Index count_above(const Vector& sv, double threshold) {
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) ++r;
  }
  return r;
}

}  // namespace

Vector singular_values(const Matrix& m) {
  if (m.size() == 0) return Vector();
  return decompose<0>(m);
}

Index numerical_rank(const Matrix& m, double rel_tol) {
  const Vector sv = singular_values(m);
  return count_above(sv, cutoff(sv, rel_tol));
}

Matrix range_basis(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return Matrix(m.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const Index r = count_above(sv, cutoff(sv, rel_tol));
  return svd.matrixU().leftCols(r);
}

Matrix null_space_basis(const Matrix& m, double rel_tol) {
  const Index n = m.cols();
  if (m.rows() == 0 || n == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const Index r = count_above(sv, cutoff(sv, rel_tol));
  return svd.matrixV().rightCols(n - r);
}

Matrix complement_basis(const Matrix& basis, Index dim, double rel_tol) {
  if (basis.cols() == 0) return Matrix::Identity(dim, dim);
  if (basis.rows() != dim) {
    throw DimensionError("complement_basis: basis has " +
                         std::to_string(basis.rows()) + " rows, expected " +
                         std::to_string(dim));
  }
  return null_space_basis(basis.transpose(), rel_tol);
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}

Matrix hstack(const Matrix& left, const Matrix& right) {
  if (left.cols() == 0) return right;
  if (right.cols() == 0) return left;
  if (left.rows() != right.rows()) {
    throw DimensionError("hstack: row mismatch");
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

double projected_norm(const Vector& v, const Matrix& basis) {
  if (basis.cols() == 0) return 0.0;
  const Matrix q = range_basis(basis);
  return (q.transpose() * v).norm();
}

namespace {

bool same_bits(const double* a, const double* b, Index count) {
  return std::equal(a, a + count, b, [](double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  });
}

}  // namespace

bool identical(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && same_bits(a.data(), b.data(), a.size());
}

bool identical(const Vector& a, const Vector& b) {
  return a.size() == b.size() && same_bits(a.data(), b.data(), a.size());
}

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NonFiniteError(std::string(what) + ": non-finite entries");
  }
}

void require_finite(const Vector& v, std::string_view what) {
  if (!v.allFinite()) {
    throw NonFiniteError(std::string(what) + ": non-finite entries");
  }
}

}  // namespace pontryagin::linalg
