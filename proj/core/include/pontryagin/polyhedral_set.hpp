#pragma once

#include "pontryagin/types.hpp"

#include <vector>

namespace pontryagin {

enum class SetKind { all_space, box, half_spaces };

/// Nonempty closed convex polyhedron in R^m: the whole space, a box with
/// possibly infinite bounds, or a system {u : normals * u <= offsets}.
/// Control sets U_t and their tangent cones are both represented this way.
class PolyhedralSet {
 public:
  static PolyhedralSet all_space(Index dim);
  static PolyhedralSet box(Vector lower, Vector upper);
  /// Throws MembershipError when the system is infeasible.
  static PolyhedralSet half_spaces(Matrix normals, Vector offsets);

  SetKind kind() const { return kind_; }
  Index dim() const { return dim_; }

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Matrix& normals() const { return normals_; }
  const Vector& offsets() const { return offsets_; }

  /// Largest constraint violation of u (0 when u is a member).
  double violation(const Vector& u) const;
  bool contains(const Vector& u, double tol = kMembershipTol) const {
    return violation(u) <= tol;
  }

  /// True when every constraint is homogeneous, i.e. the set is a cone.
  bool is_cone() const;
  bool is_bounded() const;

  /// The same set written as a half-space system (boxes expand to rows).
  PolyhedralSet as_half_spaces() const;

  friend bool operator==(const PolyhedralSet& a, const PolyhedralSet& b);

 private:
  PolyhedralSet() = default;

  SetKind kind_ = SetKind::all_space;
  Index dim_ = 0;
  Vector lower_;
  Vector upper_;
  Matrix normals_;
  Vector offsets_;
};

/// Tangent cone T_U(point) = closure of R_+(U - point). For boxes, active
/// lower bounds give d_i >= 0 and active upper bounds d_i <= 0; for half-space
/// systems the active rows are kept with zero offsets.
PolyhedralSet tangent_cone(const PolyhedralSet& set, const Vector& point,
                           double tol = kMembershipTol);

/// Finite description of a polyhedral cone: T = span(lineality) + cone(rays),
/// with rays unit-length and orthogonal to the lineality space.
struct ConeGenerators {
  Matrix lineality;  // orthonormal columns
  Matrix rays;       // unit columns

  Index ambient_dim() const { return lineality.rows(); }
  /// Dimension of span(T), which is also the affine-hull dimension.
  Index span_dim() const;
  /// Orthonormal basis of span(T).
  Matrix span_basis() const;
  /// Columns whose nonnegative combinations generate T (lineality enters
  /// with both signs).
  Matrix generating_set() const;
};

ConeGenerators decompose_cone(const PolyhedralSet& cone, double tol = 1e-10);

/// Vertices of a bounded polyhedron by brute-force basis enumeration.
std::vector<Vector> vertices(const PolyhedralSet& set, double tol = 1e-9);

}  // namespace pontryagin
