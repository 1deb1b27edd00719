#pragma once

#include "pontryagin/types.hpp"

#include <vector>

namespace pontryagin::lp {

/// maximize objective' x  subject to  ub_matrix x <= ub_rhs,
///                                    eq_matrix x == eq_rhs,
///                                    x_j >= 0 unless free_variable[j].
/// Empty matrices mean "no constraints of that kind"; an empty
/// free_variable vector means all variables are nonnegative.
struct LinearProgram {
  Vector objective;
  Matrix ub_matrix;
  Vector ub_rhs;
  Matrix eq_matrix;
  Vector eq_rhs;
  std::vector<bool> free_variable;

  Index num_variables() const { return objective.size(); }
};

enum class Status { optimal, infeasible, unbounded };

struct Solution {
  Status status = Status::infeasible;
  Vector x;
  double value = 0.0;
  /// Improving feasible direction when status == unbounded.
  Vector ray;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. Intended
/// for the small systems (tens of rows and columns) produced by cone and
/// control-set queries.
Solution solve(const LinearProgram& program, double tol = 1e-11);

/// Lawson-Hanson non-negative least squares: argmin ||a x - b|| over x >= 0.
Vector nnls(const Matrix& a, const Vector& b, double tol = 1e-13);

/// Least squares where the first `free_count` variables are unrestricted and
/// the remaining ones are nonnegative.
Vector mixed_nnls(const Matrix& a, const Vector& b, Index free_count,
                  double tol = 1e-13);

}  // namespace pontryagin::lp
