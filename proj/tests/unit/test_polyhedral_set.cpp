#include <doctest.h>

#include "generators.hpp"
#include "pontryagin/polyhedral_set.hpp"

#include <cmath>

using namespace pontryagin;
using testing::Gen;
using testing::mat;
using testing::vec;

namespace {

PolyhedralSet unit_box(Index m) {
  return PolyhedralSet::box(Vector::Zero(m), Vector::Ones(m));
}

PolyhedralSet simplex3() {
  // u >= 0, u1 + u2 + u3 <= 1
  Matrix g(4, 3);
  g << -1, 0, 0, 0, -1, 0, 0, 0, -1, 1, 1, 1;
  return PolyhedralSet::half_spaces(g, vec({0, 0, 0, 1}));
}

// d belongs to closure(R_+(U - u)) when u + s d is in U for some small s > 0.
bool feasible_direction(const PolyhedralSet& set, const Vector& u, const Vector& d) {
  for (double s : {1e-3, 1e-5, 1e-7}) {
    if (set.contains(u + s * d, 1e-12)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("membership and violation for each representation") {
  const PolyhedralSet all = PolyhedralSet::all_space(2);
  CHECK(all.contains(vec({1e9, -1e9})));
  CHECK(all.is_cone());
  CHECK_FALSE(all.is_bounded());

  const PolyhedralSet box = unit_box(2);
  CHECK(box.contains(vec({0, 1})));
  CHECK(box.violation(vec({1.5, -0.25})) == doctest::Approx(0.5));
  CHECK(box.is_bounded());
  CHECK_FALSE(box.is_cone());

  const PolyhedralSet half = PolyhedralSet::box(vec({0, -kInfinity}), vec({kInfinity, kInfinity}));
  CHECK(half.is_cone());
  CHECK_FALSE(half.is_bounded());
  CHECK(half.contains(vec({0, -1e12})));

  const PolyhedralSet s = simplex3();
  CHECK(s.contains(vec({0.2, 0.3, 0.5})));
  CHECK_FALSE(s.contains(vec({0.5, 0.5, 0.5})));
  CHECK(s.violation(vec({0.5, 0.5, 0.5})) == doctest::Approx(0.5));
  CHECK(s.is_bounded());
}

TEST_CASE("empty sets are rejected") {
  CHECK_THROWS_AS(PolyhedralSet::box(vec({1}), vec({0})), MembershipError);
  CHECK_THROWS_AS(PolyhedralSet::half_spaces(mat({{1}, {-1}}), vec({-1, -1})), MembershipError);
  CHECK_THROWS_AS(PolyhedralSet::box(vec({0, 0}), vec({1})), DimensionError);
}

TEST_CASE("as_half_spaces describes the same set") {
  Gen gen(201);
  for (int trial = 0; trial < 20; ++trial) {
    const Index m = gen.integer(1, 4);
    const PolyhedralSet box = gen.box(m);
    const PolyhedralSet rows = box.as_half_spaces();
    CHECK(rows.kind() == SetKind::half_spaces);
    for (int k = 0; k < 50; ++k) {
      const Vector u = 2.5 * gen.vector(m);
      CHECK(box.contains(u) == rows.contains(u));
    }
  }
}

TEST_CASE("tangent cone of a box at an interior point is the whole space") {
  const PolyhedralSet cone = tangent_cone(unit_box(2), vec({0.5, 0.5}));
  CHECK(cone.kind() == SetKind::all_space);
  CHECK(cone.dim() == 2);
}

TEST_CASE("tangent cone of a box with one active lower bound") {
  const PolyhedralSet cone = tangent_cone(unit_box(2), vec({0, 0.5}));
  CHECK(cone.contains(vec({1, -3})));
  CHECK(cone.contains(vec({0, 7})));
  CHECK_FALSE(cone.contains(vec({-1, 0})));
  CHECK(cone.is_cone());
}

TEST_CASE("tangent cone of the simplex at a vertex matches a sampling oracle") {
  const PolyhedralSet s = simplex3();
  const Vector e1 = vec({1, 0, 0});
  const PolyhedralSet cone = tangent_cone(s, e1);
  // Active rows: -u2 <= 0, -u3 <= 0, sum <= 1.
  CHECK(cone.kind() == SetKind::half_spaces);
  CHECK(cone.normals().rows() == 3);

  Gen gen(202);
  int mismatches = 0;
  for (int k = 0; k < 10000; ++k) {
    const Vector d = gen.unit_vector(3);
    // Directions exactly on a face of the cone are ambiguous under sampling.
    const double slack = (cone.normals() * d - cone.offsets()).cwiseAbs().minCoeff();
    if (slack < 1e-6) continue;
    if (cone.contains(d) != feasible_direction(s, e1, d)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("tangent cone requires membership") {
  CHECK_THROWS_AS(tangent_cone(unit_box(2), vec({2, 0})), MembershipError);
  CHECK_THROWS_AS(tangent_cone(unit_box(2), vec({0.5})), DimensionError);
}

TEST_CASE("tangent cones contain zero and are closed under positive scaling") {
  Gen gen(203);
  for (int trial = 0; trial < 60; ++trial) {
    const Index m = gen.integer(1, 4);
    const PolyhedralSet set = gen.coin() ? gen.box(m) : gen.polytope(m, gen.integer(0, 3));
    const Vector interior = Vector::Zero(m);
    const Vector u = gen.coin() ? gen.boundary_point(set, interior) : interior;
    REQUIRE(set.contains(u));
    const PolyhedralSet cone = tangent_cone(set, u);
    CHECK(cone.contains(Vector::Zero(m)));
    CHECK(cone.is_cone());
    for (int k = 0; k < 40; ++k) {
      const Vector d = gen.vector(m);
      if (!cone.contains(d)) continue;
      for (double lambda : {1e-3, 0.5, 2.0, 1e3}) CHECK(cone.contains(lambda * d, 1e-6 * lambda));
      if (cone.violation(d) == 0.0) CHECK(feasible_direction(set, u, d));
    }
  }
}

TEST_CASE("tangent cone at any interior point is the whole space") {
  Gen gen(204);
  for (int trial = 0; trial < 40; ++trial) {
    const Index m = gen.integer(1, 4);
    const PolyhedralSet set = gen.coin() ? gen.box(m, false) : gen.polytope(m, 2);
    const PolyhedralSet cone = tangent_cone(set, 0.01 * gen.vector(m));
    for (int k = 0; k < 20; ++k) CHECK(cone.contains(1e3 * gen.vector(m)));
  }
}

TEST_CASE("decompose_cone splits lineality and rays") {
  SUBCASE("whole space") {
    const ConeGenerators g = decompose_cone(PolyhedralSet::all_space(3));
    CHECK(g.lineality.cols() == 3);
    CHECK(g.rays.cols() == 0);
    CHECK(g.span_dim() == 3);
  }
  SUBCASE("half line") {
    const PolyhedralSet cone = PolyhedralSet::box(vec({0}), vec({kInfinity}));
    const ConeGenerators g = decompose_cone(cone);
    CHECK(g.lineality.cols() == 0);
    REQUIRE(g.rays.cols() == 1);
    CHECK(g.rays(0, 0) == doctest::Approx(1.0));
    CHECK(g.span_dim() == 1);
  }
  SUBCASE("zero cone") {
    const PolyhedralSet cone = PolyhedralSet::box(vec({0, 0}), vec({0, 0}));
    const ConeGenerators g = decompose_cone(cone);
    CHECK(g.span_dim() == 0);
    CHECK(g.generating_set().cols() == 0);
  }
  SUBCASE("half plane") {
    const PolyhedralSet cone = PolyhedralSet::box(vec({0, -kInfinity}), vec({kInfinity, kInfinity}));
    const ConeGenerators g = decompose_cone(cone);
    CHECK(g.lineality.cols() == 1);
    CHECK(g.rays.cols() == 1);
    CHECK(g.span_dim() == 2);
  }
}

TEST_CASE("cone generators reproduce the cone") {
  Gen gen(205);
  for (int trial = 0; trial < 40; ++trial) {
    const Index m = gen.integer(1, 4);
    const PolyhedralSet set = gen.polytope(m, gen.integer(0, 3));
    const PolyhedralSet cone = tangent_cone(set, gen.boundary_point(set, Vector::Zero(m)));
    const ConeGenerators g = decompose_cone(cone);
    const Matrix gens = g.generating_set();
    // Every generator is in the cone.
    for (Index j = 0; j < gens.cols(); ++j) CHECK(cone.contains(gens.col(j), 1e-8));
    // Every rays column is unit and orthogonal to the lineality space.
    for (Index j = 0; j < g.rays.cols(); ++j) {
      CHECK(g.rays.col(j).norm() == doctest::Approx(1.0));
      if (g.lineality.cols() > 0) CHECK((g.lineality.transpose() * g.rays.col(j)).norm() < 1e-9);
    }
    // Random nonnegative combinations stay in the cone.
    for (int k = 0; k < 20; ++k) {
      if (gens.cols() == 0) break;
      Vector w(gens.cols());
      for (Index j = 0; j < w.size(); ++j) w(j) = gen.uniform(0, 1);
      CHECK(cone.contains(gens * w, 1e-8));
    }
    const Matrix span = g.span_basis();
    CHECK(span.cols() == g.span_dim());
  }
}

TEST_CASE("vertices of simple polytopes") {
  const auto box_vertices = vertices(unit_box(2));
  CHECK(box_vertices.size() == 4);

  const auto simplex_vertices = vertices(simplex3());
  CHECK(simplex_vertices.size() == 4);
  for (const Vector& v : simplex_vertices) CHECK(simplex3().contains(v));

  Gen gen(206);
  for (int trial = 0; trial < 20; ++trial) {
    const Index m = gen.integer(1, 3);
    const PolyhedralSet p = gen.polytope(m, gen.integer(0, 3));
    const auto vs = vertices(p);
    CHECK(vs.size() >= static_cast<std::size_t>(m + 1));
    for (const Vector& v : vs) {
      CHECK(p.contains(v, 1e-8));
      // A vertex has m linearly independent active rows.
      const PolyhedralSet rows = p.as_half_spaces();
      const Vector slack = rows.offsets() - rows.normals() * v;
      Matrix active(0, m);
      for (Index i = 0; i < slack.size(); ++i) {
        if (std::abs(slack(i)) < 1e-8) {
          active.conservativeResize(active.rows() + 1, Eigen::NoChange);
          active.row(active.rows() - 1) = rows.normals().row(i);
        }
      }
      CHECK(Eigen::FullPivLU<Matrix>(active).rank() == m);
    }
  }
}

TEST_CASE("sets compare by value") {
  CHECK(unit_box(2) == unit_box(2));
  CHECK_FALSE(unit_box(2) == PolyhedralSet::all_space(2));
  CHECK(simplex3() == simplex3());
}
