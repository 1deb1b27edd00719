#pragma once

#include "pontryagin/types.hpp"

#include <string_view>

namespace pontryagin::linalg {

/// Singular values in decreasing order.
Vector singular_values(const Matrix& m);

/// Number of singular values above max(rel_tol * sigma_max, kSingularValueFloor).
Index numerical_rank(const Matrix& m, double rel_tol = kDefaultRankTol);

/// Orthonormal basis (columns) of range(m).
Matrix range_basis(const Matrix& m, double rel_tol = kDefaultRankTol);

/// Orthonormal basis (columns) of null(m).
Matrix null_space_basis(const Matrix& m, double rel_tol = kDefaultRankTol);

/// Orthonormal basis of the orthogonal complement of span(basis) in R^dim.
/// `basis` need not be orthonormal.
Matrix complement_basis(const Matrix& basis, Index dim,
                        double rel_tol = kDefaultRankTol);

/// Largest singular value (operator 2-norm); zero for empty matrices.
double spectral_norm(const Matrix& m);

/// Horizontal concatenation tolerant of zero-column blocks.
Matrix hstack(const Matrix& left, const Matrix& right);

/// Euclidean norm of the orthogonal projection of v onto span(basis).
double projected_norm(const Vector& v, const Matrix& basis);

/// Same shape and bitwise-equal entries; never asserts on shape mismatch.
bool identical(const Matrix& a, const Matrix& b);
bool identical(const Vector& a, const Vector& b);

void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

}  // namespace pontryagin::linalg
