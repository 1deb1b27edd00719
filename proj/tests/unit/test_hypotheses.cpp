#include <doctest.h>

#include "generators.hpp"
#include "pontryagin/hypotheses.hpp"
#include "pontryagin/instances.hpp"
#include "pontryagin/limit_analysis.hpp"
#include "pontryagin/linalg.hpp"
#include "pontryagin/lp.hpp"

#include <cmath>

using namespace pontryagin;
using testing::Gen;
using testing::mat;
using testing::vec;

namespace {

LinearizedStage stage(Index t, Matrix a, Matrix b) {
  LinearizedStage s;
  s.t = t;
  s.c = Vector::Zero(a.rows());
  s.d = Vector::Zero(b.cols());
  s.A = std::move(a);
  s.B = std::move(b);
  return s;
}

PolyhedralSet orthant(Index m) {
  return PolyhedralSet::box(Vector::Zero(m), Vector::Constant(m, kInfinity));
}

PolyhedralSet half_line(double sign) {
  return sign > 0 ? PolyhedralSet::box(vec({0}), vec({kInfinity}))
                  : PolyhedralSet::box(vec({-kInfinity}), vec({0}));
}

// Random cone: all-space, an orthant-like box cone, or a half-space cone.
PolyhedralSet random_cone(Gen& gen, Index m) {
  switch (gen.integer(0, 2)) {
    case 0:
      return PolyhedralSet::all_space(m);
    case 1: {
      Vector lo(m), hi(m);
      for (Index i = 0; i < m; ++i) {
        const Index k = gen.integer(0, 2);
        lo(i) = k == 1 ? 0.0 : -kInfinity;
        hi(i) = k == 2 ? 0.0 : kInfinity;
      }
      return PolyhedralSet::box(lo, hi);
    }
    default: {
      const Index rows = gen.integer(1, m + 1);
      return PolyhedralSet::half_spaces(gen.matrix(rows, m), Vector::Zero(rows));
    }
  }
}

}  // namespace

TEST_CASE("H4 passes when A_t B_{t-1} already spans") {
  Gen gen(601);
  const Check c = check_H4(stage(1, gen.matrix(2, 2), Matrix::Identity(2, 2)),
                           stage(2, Matrix::Identity(2, 2), gen.matrix(2, 2)), orthant(2));
  CHECK(c.verdict == Verdict::pass);
  CHECK(c.t == 2);
  CHECK(c.margin > 0.0);
}

TEST_CASE("H4 fails for an orthant image and passes for the whole space") {
  const LinearizedStage prev = stage(1, Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  const LinearizedStage now = stage(2, Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  CHECK(check_H4(prev, now, orthant(2)).verdict == Verdict::fail);
  CHECK(check_H4(prev, now, PolyhedralSet::all_space(2)).verdict == Verdict::pass);
  CHECK_THROWS_AS(check_H4(prev, now, orthant(3)), DimensionError);
}

TEST_CASE("H4 over the whole space reduces to a rank test") {
  Gen gen(602);
  int passes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = gen.integer(1, 4), m = gen.integer(1, 3);
    const Matrix a = gen.coin() ? gen.matrix(n, n) : gen.matrix_of_rank(n, n, gen.integer(1, n));
    const Matrix bp = gen.matrix_of_rank(n, m, gen.integer(1, std::min(n, m)));
    const Matrix b = gen.matrix_of_rank(n, m, gen.integer(1, std::min(n, m)));
    const Check c = check_H4(stage(1, gen.matrix(n, n), bp), stage(2, a, b), PolyhedralSet::all_space(m));
    Matrix stacked(n, 2 * m);
    stacked << a * bp, b;
    const bool rank_full = linalg::numerical_rank(stacked) == n;
    CHECK((c.verdict == Verdict::pass) == rank_full);
    passes += rank_full;
  }
  CHECK(passes > 10);
  CHECK(passes < 90);
}

TEST_CASE("H5 examples") {
  Gen gen(603);
  // Both cones whole space and [A_1 B_0 | B_1] of full row rank.
  const Check full = check_H5(stage(0, gen.matrix(2, 2), gen.matrix(2, 1)), stage(1, gen.matrix(2, 2), gen.matrix(2, 1)),
                              PolyhedralSet::all_space(1), PolyhedralSet::all_space(1));
  CHECK(full.verdict == Verdict::pass);

  const Check zero = check_H5(stage(0, mat({{1}}), mat({{0}})), stage(1, mat({{1}}), mat({{0}})),
                              PolyhedralSet::all_space(1), PolyhedralSet::all_space(1));
  CHECK(zero.verdict == Verdict::fail);

  // a = b = 1 with cones R+ and R-: R+ + R- = R.
  const Check scalar = check_H5(stage(0, mat({{1}}), mat({{1}})), stage(1, mat({{1}}), mat({{1}})),
                                half_line(1), half_line(-1));
  CHECK(scalar.verdict == Verdict::pass);
  // Same signs only cover a half line.
  const Check same = check_H5(stage(0, mat({{1}}), mat({{1}})), stage(1, mat({{1}}), mat({{1}})),
                              half_line(1), half_line(1));
  CHECK(same.verdict == Verdict::fail);
}

TEST_CASE("H6 is automatic and reports hull dimensions") {
  // Cones from boxes keep the full ambient dimension.
  const PolyhedralSet box = PolyhedralSet::box(vec({0, 0}), vec({1, 1}));
  const PolyhedralSet c0 = tangent_cone(box, vec({0, 0.5}));
  const PolyhedralSet c1 = tangent_cone(box, vec({1, 1}));
  const Check h = check_H6(c0, c1);
  CHECK(h.verdict == Verdict::automatic);
  CHECK(h.margin == 2.0);

  // Degenerate set: the singleton {0} has a zero-dimensional hull.
  const PolyhedralSet point = PolyhedralSet::box(vec({0, 0}), vec({0, 0}));
  const Check z = check_H6(tangent_cone(point, vec({0, 0})), c0);
  CHECK(z.verdict == Verdict::automatic);
  CHECK(z.margin == 0.0);

  // Half-space cone with an implicit equality d1 = 0 in R^3: hull dimension 2.
  const Matrix g = mat({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}});
  const PolyhedralSet flat = PolyhedralSet::half_spaces(g, Vector::Zero(3));
  CHECK(decompose_cone(flat).span_dim() == 2);
  CHECK(check_H6(flat, PolyhedralSet::all_space(3)).margin == 2.0);
}

TEST_CASE("hull dimension equals the active-row null structure on random cones") {
  Gen gen(604);
  for (int trial = 0; trial < 40; ++trial) {
    const Index m = gen.integer(1, 4);
    const Index rows = gen.integer(1, 4);
    Matrix g = gen.matrix(rows, m);
    // Duplicate a row with opposite sign to create an implicit equality.
    const bool pin = gen.coin();
    if (pin) {
      g.conservativeResize(rows + 1, Eigen::NoChange);
      g.row(rows) = -g.row(0);
    }
    const PolyhedralSet cone = PolyhedralSet::half_spaces(g, Vector::Zero(g.rows()));
    // Oracle: rows that are zero on every cone member form the implicit
    // equalities; a row is implicit iff max(-g_i d) over the cone is 0.
    Matrix implicit(0, m);
    for (Index i = 0; i < g.rows(); ++i) {
      lp::LinearProgram prog;
      prog.objective = -g.row(i).transpose();
      prog.ub_matrix = Matrix(g.rows() + 2 * m, m);
      prog.ub_matrix << g, Matrix::Identity(m, m), -Matrix::Identity(m, m);
      prog.ub_rhs = Vector::Zero(g.rows() + 2 * m);
      prog.ub_rhs.tail(2 * m).setOnes();
      prog.free_variable.assign(static_cast<std::size_t>(m), true);
      const lp::Solution sol = lp::solve(prog);
      REQUIRE(sol.status == lp::Status::optimal);
      if (sol.value <= 1e-9) {
        implicit.conservativeResize(implicit.rows() + 1, Eigen::NoChange);
        implicit.row(implicit.rows() - 1) = g.row(i);
      }
    }
    const Index oracle = m - (implicit.rows() > 0 ? linalg::numerical_rank(implicit) : 0);
    CHECK(decompose_cone(cone).span_dim() == oracle);
    if (pin) CHECK(oracle < m);
  }
}

TEST_CASE("positive spanning certificates are honest") {
  Gen gen(605);
  int passes = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = gen.integer(1, 4);
    const Index sub_cols = gen.integer(0, n - 1);
    const Matrix sub = sub_cols > 0 ? gen.matrix(n, sub_cols) : Matrix(n, 0);
    const Matrix rays = gen.matrix(n, gen.integer(0, 2 * n + 2));
    const ConeCoverage cov = conic_sum_covers(sub, rays, n);
    if (!cov.covers) continue;
    ++passes;
    CHECK(cov.cone_margin >= 0.0);
    const Index k = cov.complement.cols();
    if (k == 0) continue;
    for (int s = 0; s < 200; ++s) {
      const Vector w = cov.complement * gen.unit_vector(k);
      const Vector target = cov.complement.transpose() * w;
      const Vector coeff = lp::nnls(cov.projected_rays, target);
      CHECK((cov.projected_rays * coeff - target).norm() <= 1e-8);
    }
  }
  CHECK(passes > 5);
}

TEST_CASE("coverage rejects rays confined to a half space") {
  Gen gen(606);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = gen.integer(1, 4);
    const Vector normal = gen.unit_vector(n);
    Matrix rays = gen.matrix(n, 3 * n);
    for (Index j = 0; j < rays.cols(); ++j) {
      const double s = normal.dot(rays.col(j));
      if (s > 0) rays.col(j) -= 2 * s * normal;  // reflect into {normal . r <= 0}
    }
    CHECK_FALSE(conic_sum_covers(Matrix(n, 0), rays, n).covers);
  }
  // The cross polytope positively spans with inradius 1/sqrt(n) in the l-infinity sense.
  Matrix cross(2, 4);
  cross << 1, -1, 0, 0, 0, 0, 1, -1;
  const ConeCoverage cov = conic_sum_covers(Matrix(2, 0), cross, 2);
  CHECK(cov.covers);
  CHECK(cov.cone_margin > 0.0);
}

TEST_CASE("H5 passing means every direction decomposes") {
  Gen gen(607);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = gen.integer(1, 3), m = gen.integer(1, 3);
    const LinearizedStage s0 = stage(0, gen.matrix(n, n), gen.matrix(n, m));
    const LinearizedStage s1 = stage(1, gen.matrix(n, n), gen.matrix(n, m));
    const PolyhedralSet c0 = random_cone(gen, m);
    const PolyhedralSet c1 = random_cone(gen, m);
    if (check_H5(s0, s1, c0, c1).verdict != Verdict::pass) continue;
    ++checked;
    for (int k = 0; k < 50; ++k) {
      const DecompositionWitness w = decompose_v(3.0 * gen.vector(n), s0, s1, c0, c1);
      CHECK(w.feasible);
      CHECK(w.residual <= 1e-8);
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("range conditions on a stationary LQ fixture with onto B") {
  Gen gen(608);
  std::vector<LinearizedStage> stages;
  const Matrix a = gen.matrix(2, 2), b = gen.matrix(2, 3);
  for (Index t = 0; t <= 5; ++t) stages.push_back(stage(t, a, b));
  const RangeConditions r = check_range_conditions(stages);
  CHECK(r.closed_image.verdict == Verdict::automatic);
  CHECK(r.range_sum.size() == 5);
  CHECK(r.stage_onto.size() == 4);
  for (const Check& c : r.range_sum) CHECK(c.verdict == Verdict::pass);
  for (const Check& c : r.stage_onto) CHECK(c.verdict == Verdict::pass);
  CHECK(r.initial_onto.verdict == Verdict::pass);
}

TEST_CASE("stage onto fails where B_t vanishes and A_t is singular") {
  std::vector<LinearizedStage> stages;
  for (Index t = 0; t <= 4; ++t) stages.push_back(stage(t, Matrix::Identity(2, 2), Matrix::Identity(2, 2)));
  stages[3] = stage(3, mat({{1, 0}, {0, 0}}), Matrix::Zero(2, 2));
  const RangeConditions r = check_range_conditions(stages);
  for (const Check& c : r.stage_onto) CHECK((c.verdict == Verdict::fail) == (c.t == 3));
}

TEST_CASE("range sum can hold while stage onto fails") {
  // range [A_t B_t] = span(e1) contains range(A_t B_{t-1}) + range(B_t) = span(e1).
  std::vector<LinearizedStage> stages;
  for (Index t = 0; t <= 3; ++t) stages.push_back(stage(t, Matrix::Identity(2, 2), Matrix::Identity(2, 2)));
  stages[2] = stage(2, mat({{1, 0}, {0, 0}}), mat({{1, 0}, {0, 0}}));
  const RangeConditions r = check_range_conditions(stages);
  const Check& sum2 = r.range_sum[1];
  const Check& onto2 = r.stage_onto[0];
  REQUIRE(sum2.t == 2);
  REQUIRE(onto2.t == 2);
  CHECK(sum2.verdict == Verdict::pass);
  CHECK(onto2.verdict == Verdict::fail);
}

TEST_CASE("H4 passing implies stage onto at the same t") {
  Gen gen(609);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = gen.integer(1, 3), m = gen.integer(1, 3);
    const Index cap = 4;
    std::vector<LinearizedStage> stages;
    std::vector<PolyhedralSet> cones;
    for (Index t = 0; t <= cap; ++t) {
      stages.push_back(stage(t, gen.matrix_of_rank(n, n, gen.integer(1, n)),
                             gen.matrix_of_rank(n, m, gen.integer(1, std::min(n, m)))));
      cones.push_back(random_cone(gen, m));
    }
    const RangeConditions r = check_range_conditions(stages);
    for (Index t = 2; t <= cap; ++t) {
      const Check h4 = check_H4(stages[static_cast<std::size_t>(t - 1)], stages[static_cast<std::size_t>(t)],
                                cones[static_cast<std::size_t>(t)]);
      if (h4.verdict == Verdict::pass) CHECK(r.stage_onto[static_cast<std::size_t>(t - 2)].verdict == Verdict::pass);
    }
  }
}

TEST_CASE("builtins match their declared hypothesis profiles") {
  for (const std::string& name : builtin_names()) {
    CAPTURE(name);
    const InstanceBundle b = builtin(name);
    HypothesisOptions opts;
    opts.cap = 12;
    const HypothesisReport r = check_hypotheses(b.system, b.reference, opts);
    CHECK(r.cap == 12);
    CHECK(r.H4.size() == 11);
    CHECK(r.H1.verdict == Verdict::automatic);
    CHECK(r.H6.verdict == Verdict::automatic);
    for (const auto& [family, expected] : b.definition.hypothesis_profile) {
      CAPTURE(family);
      CHECK(to_string(r.aggregate(family)) == expected);
    }
    // H1 H2 H3 H5 H6, H4 at t = 2..12, closed_image, range_sum at 1..12, stage_onto at 2..12, initial_onto
    CHECK(r.all_checks().size() == 5 + 11 + 1 + 12 + 11 + 1);
  }
}

TEST_CASE("the report cap follows the reference length") {
  const InstanceBundle b = builtin("lq-stable");
  HypothesisOptions opts;
  opts.cap = 1000;
  const HypothesisReport r = check_hypotheses(b.system, b.reference, opts);
  CHECK(r.cap == b.reference.length() - 1);
}

TEST_CASE("H2 is not checked for general open domains and H3 fails on broken derivatives") {
  ControlSystemParts parts;
  parts.state_dim = 1;
  parts.control_dim = 1;
  parts.dynamics = [](Index, const Vector& x, const Vector& u) { return Vector(x + u); };
  parts.reward = [](Index, const Vector&, const Vector& u) { return std::sqrt(std::abs(u(0))); };
  parts.state_domain = [](Index) { return StateDomain::all_space(1); };
  parts.control_set = [](Index) { return PolyhedralSet::all_space(1); };
  parts.derivatives = [](Index, const Vector&, const Vector&) {
    return StageDerivatives{mat({{1}}), mat({{1}}), vec({0}), vec({NAN})};
  };
  const ControlSystem sys(std::move(parts));
  const Process ref = simulate(sys, vec({0}), std::vector<Vector>(6, vec({0})), 5);
  HypothesisOptions opts;
  opts.cap = 4;
  const HypothesisReport r = check_hypotheses(sys, ref, opts);
  CHECK(r.H2.verdict == Verdict::pass);  // all-space domain is open
  CHECK(r.H3.verdict == Verdict::fail);
}

TEST_CASE("verdict names") {
  CHECK(to_string(Verdict::pass) == "pass");
  CHECK(to_string(Verdict::fail) == "fail");
  CHECK(to_string(Verdict::automatic) == "automatic");
  CHECK(to_string(Verdict::not_checked) == "not-checked");
}
