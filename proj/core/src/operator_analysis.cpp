#include "pontryagin/operator_analysis.hpp"

#include "pontryagin/linalg.hpp"

#include <algorithm>

namespace pontryagin {
namespace {

double cutoff(const Vector& sv, double rel_tol) {
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  return std::max(rel_tol * top, kSingularValueFloor);
}

}  // namespace

RangeReport range_report(const Matrix& m, double rank_tolerance) {
  linalg::require_finite(m, "range_report");
  RangeReport out;
  out.rows = m.rows();
  out.cols = m.cols();
  out.rank_tolerance = rank_tolerance;
  if (m.size() == 0) {
    out.range_basis = Matrix(m.rows(), 0);
    out.surjective = m.rows() == 0;
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  out.singular_values = svd.singularValues();
  const double cut = cutoff(out.singular_values, rank_tolerance);
  Index r = 0;
  while (r < out.singular_values.size() && out.singular_values(r) > cut) ++r;
  out.numerical_rank = r;
  out.smallest_positive_singular_value = r > 0 ? out.singular_values(r - 1) : 0.0;
  out.surjective = r == m.rows();
  out.range_basis = svd.matrixU().leftCols(r);
  return out;
}

Preimage least_norm_preimage(const Matrix& m, const Vector& y, double rank_tolerance) {
  if (m.rows() != y.size()) throw DimensionError("least_norm_preimage: row mismatch");
  Preimage out;
  if (m.size() == 0) {
    out.x = Vector::Zero(m.cols());
    out.residual = y.norm();
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut = cutoff(sv, rank_tolerance);
  Vector coeff = svd.matrixU().transpose() * y;
  for (Index i = 0; i < sv.size(); ++i) coeff(i) = sv(i) > cut ? coeff(i) / sv(i) : 0.0;
  out.x = svd.matrixV() * coeff;
  out.residual = (m * out.x - y).norm();
  return out;
}

RangeSumReport sum_of_ranges_equals(const Matrix& m1, const Matrix& m2,
                                    const std::optional<Matrix>& target_range,
                                    double rank_tolerance) {
  if (m1.rows() != m2.rows() || (target_range && target_range->rows() != m1.rows())) {
    throw DimensionError("sum_of_ranges_equals: row dimensions differ");
  }
  RangeSumReport out;
  const Matrix sum = linalg::hstack(m1, m2);
  out.sum_rank = linalg::numerical_rank(sum, rank_tolerance);
  if (!target_range) {
    out.target_rank = m1.rows();
    out.equal = out.sum_rank == out.target_rank;
    return out;
  }
  out.target_rank = linalg::numerical_rank(*target_range, rank_tolerance);
  const Index joint = linalg::numerical_rank(linalg::hstack(sum, *target_range), rank_tolerance);
  out.contained = joint == out.target_rank;
  out.equal = out.contained && out.sum_rank == out.target_rank;
  return out;
}

}  // namespace pontryagin
