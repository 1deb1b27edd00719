#pragma once

#include "pontryagin/types.hpp"

#include <optional>

namespace pontryagin {

struct RangeReport {
  Index rows = 0;
  Index cols = 0;
  Index numerical_rank = 0;
  double rank_tolerance = kDefaultRankTol;
  /// Smallest retained singular value: the preimage-bound constant c, with
  /// ||y|| >= c ||x_y|| for the least-norm preimage x_y. Zero when rank is 0.
  double smallest_positive_singular_value = 0.0;
  bool surjective = false;
  Matrix range_basis;
  Vector singular_values;
};

RangeReport range_report(const Matrix& m, double rank_tolerance = kDefaultRankTol);

struct Preimage {
  Vector x;
  double residual = 0.0;
};

/// Truncated-pseudoinverse solution of m x = y. Never throws for y outside
/// the range; the residual ||m x - y|| signals it.
Preimage least_norm_preimage(const Matrix& m, const Vector& y,
                             double rank_tolerance = kDefaultRankTol);

struct RangeSumReport {
  bool equal = false;
  Index sum_rank = 0;     // rank [M1 | M2]
  Index target_rank = 0;  // rows, or rank M3
  /// For a range target: rank [M1 | M2 | M3] == rank M3.
  bool contained = true;
};

/// Decides range(M1) + range(M2) == target, where the target is all of R^rows
/// when `target_range` is empty and range(*target_range) otherwise.
RangeSumReport sum_of_ranges_equals(const Matrix& m1, const Matrix& m2,
                                    const std::optional<Matrix>& target_range = std::nullopt,
                                    double rank_tolerance = kDefaultRankTol);

}  // namespace pontryagin
