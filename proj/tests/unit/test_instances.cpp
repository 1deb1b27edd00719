#include <doctest.h>

#include "generators.hpp"
#include "pontryagin/finite_horizon.hpp"
#include "pontryagin/hypotheses.hpp"
#include "pontryagin/instances.hpp"
#include "pontryagin/linalg.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pontryagin;
using testing::Gen;
using testing::mat;
using testing::vec;

namespace {

const std::string kMinimal = R"(format: 1
name: tiny
state_dim: 1
control_dim: 1
dynamics:
  family: linear
  A: [[0.5]]
  B: [[1]]
reward:
  family: quadratic
  Q: [[1]]
  R: [[1]]
state_domain:
  kind: all_space
control_set:
  kind: box
  lower: [-1]
  upper: [1]
initial_state: [1]
reference:
  states: [[1], [0.5], [0.25]]
  controls: [[0], [0]]
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

SchemaError schema_error(const std::string& text) {
  try {
    parse_yaml(text);
  } catch (const SchemaError& e) {
    return e;
  }
  FAIL("expected a schema error");
  return SchemaError("", -1, "");
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pontryagin-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("builtin names") {
  const auto names = builtin_names();
  CHECK(names == std::vector<std::string>{"lq-stable", "lq-boundary-control", "ramsey-growth",
                                          "inert-control-abnormal", "rank-deficient-H4-fail"});
  CHECK_THROWS_AS(builtin("lq-unstable"), UnknownInstanceError);
}

TEST_CASE("builtin references are feasible") {
  for (const std::string& name : builtin_names()) {
    CAPTURE(name);
    const InstanceBundle b = builtin(name);
    CHECK(b.reference.length() >= 41);
    CHECK(b.definition.name == name);
    CHECK(linalg::identical(b.reference.initial_state(), b.definition.initial_state));
    for (Index t = 0; t < b.reference.length(); ++t) {
      CHECK(b.system.control_set(t).contains(b.reference.control(t)));
      CHECK(b.system.state_domain(t).contains(b.reference.state(t)));
    }
    const double scale = 1.0 + b.reference.state(0).norm();
    CHECK(dynamics_residual(b.system, b.reference, b.reference.length()) <= 1e-12 * scale);
  }
  const InstanceBundle lq = builtin("lq-stable");
  CHECK(dynamics_residual(lq.system, lq.reference, lq.reference.length()) == 0.0);
}

TEST_CASE("lq-stable is closed-loop stable with interior controls") {
  const InstanceBundle b = builtin("lq-stable");
  const Matrix& a = b.definition.dynamics.A;
  const Matrix& bm = b.definition.dynamics.B;
  const Matrix p = solve_dare(a, bm, b.definition.reward.Q, b.definition.reward.R);
  const Matrix k = (b.definition.reward.R + bm.transpose() * p * bm).ldlt().solve(bm.transpose() * p * a);
  const Matrix closed = a - bm * k;
  const double radius = closed.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(radius <= 0.9);
  CHECK(radius > 0.0);
  CHECK(b.definition.oracle == OracleKind::riccati);
  CHECK(b.system.control_set(0).kind() == SetKind::all_space);
}

TEST_CASE("lq-boundary-control saturates its box at the optimum") {
  const InstanceBundle b = builtin("lq-boundary-control");
  Index active = 0;
  for (Index t = 0; t < b.reference.length(); ++t) {
    const Vector& u = b.reference.control(t);
    if ((u.cwiseAbs().array() >= 1.0 - 1e-12).any()) ++active;
  }
  CHECK(active >= 1);
  CHECK(b.reference.control(0)(1) == doctest::Approx(1.0));
  CHECK(b.definition.oracle == OracleKind::brute_force_qp);
}

TEST_CASE("ramsey-growth follows the closed-form consumption rule") {
  const InstanceBundle b = builtin("ramsey-growth");
  const double alpha = b.definition.dynamics.alpha, beta = b.definition.reward.discount;
  for (Index t = 0; t < b.reference.length(); ++t) {
    const double x = b.reference.state(t)(0);
    CHECK(b.reference.control(t)(0) == doctest::Approx((1 - alpha * beta) * std::pow(x, alpha)).epsilon(1e-12));
  }
  CHECK(b.definition.oracle == OracleKind::brute_force_nlp);
}

TEST_CASE("rank-deficient fixture fails H4 at t = 2 by construction") {
  const InstanceBundle b = builtin("rank-deficient-H4-fail");
  const auto s1 = linearize(b.system, b.reference, 1);
  const auto s2 = linearize(b.system, b.reference, 2);
  CHECK((s2.A * s1.B).norm() == 0.0);
  CHECK(linalg::numerical_rank(s2.B) < 2);
  const Check h4 = check_H4(s1, s2, tangent_cone(b.system.control_set(2), b.reference.control(2)));
  CHECK(h4.verdict == Verdict::fail);
}

TEST_CASE("inert fixture takes the abnormal branch") {
  const InstanceBundle b = builtin("inert-control-abnormal");
  const TruncatedProblem p = truncate(b.system, b.reference, 5);
  const MultiplierSet ms = compute_multipliers(p, assemble_constraints(p));
  CHECK(ms.lambda0 == 0.0);
  CHECK(ms.costate(1).norm() > 0.0);
}

TEST_CASE("Riccati costates satisfy the adjoint recursion") {
  const InstanceBundle b = builtin("lq-stable");
  for (Index h : {2, 8, 20}) {
    const std::vector<Vector> p = riccati_oracle(b, h);
    MultiplierSet ms;
    ms.h = h;
    ms.lambda0 = 1.0;
    ms.p = p;
    std::vector<LinearizedStage> blocks;
    for (Index t = 0; t <= h; ++t) blocks.push_back(linearize(b.system, b.reference, t));
    for (double r : adjoint_residuals(ms, blocks)) CHECK(r <= 1e-10);
  }
}

TEST_CASE("oracle and computed multipliers agree for every horizon") {
  const InstanceBundle b = builtin("lq-stable");
  for (Index h = 2; h <= 20; ++h) {
    const TruncatedProblem p = truncate(b.system, b.reference, h);
    const MultiplierSet ms = compute_multipliers(p, assemble_constraints(p));
    const std::vector<Vector> oracle = riccati_oracle(b, h);
    for (Index t = 1; t <= h; ++t) {
      const Vector& want = oracle[static_cast<std::size_t>(t - 1)];
      CHECK((ms.costate(t) - want).norm() <= 1e-6 * want.norm());
    }
  }
}

TEST_CASE("YAML round trip is bitwise") {
  for (const std::string& name : builtin_names()) {
    CAPTURE(name);
    const InstanceBundle b = builtin(name);
    const std::string text = to_yaml(b.definition);
    CHECK(text.rfind("format: 1", 0) == 0);
    const ProblemDefinition back = parse_yaml(text);
    CHECK(identical(back, b.definition));
    CHECK(to_yaml(back) == text);

    const auto path = scratch(name + ".yaml");
    save(b, path);
    const InstanceBundle loaded = load(path);
    CHECK(identical(loaded.definition, b.definition));
    CHECK(loaded.reference == b.reference);
    const InstanceBundle resolved = resolve_instance(path.string());
    CHECK(resolved.reference == b.reference);
  }
}

TEST_CASE("awkward doubles survive the round trip") {
  Gen gen(901);
  auto def = parse_yaml(kMinimal);
  for (int trial = 0; trial < 50; ++trial) {
    def.dynamics.A(0, 0) = gen.normal() * std::pow(10.0, gen.integer(-300, 300));
    def.reward.Q(0, 0) = trial % 2 == 0 ? -0.0 : std::nextafter(1.0, 2.0);
    def.notes = "trial " + std::to_string(trial);
    CHECK(identical(parse_yaml(to_yaml(def)), def));
  }
}

TEST_CASE("parse_yaml reads the minimal document") {
  const ProblemDefinition def = parse_yaml(kMinimal);
  CHECK(def.name == "tiny");
  CHECK(def.control_set.kind() == SetKind::box);
  CHECK(def.reference_controls.size() == 2);
  CHECK(def.oracle == OracleKind::none);
  CHECK(def.reward.discount == 1.0);
  const InstanceBundle b = make_bundle(def);
  CHECK(b.reference.length() == 2);
}

TEST_CASE("schema errors name the field and line") {
  SUBCASE("missing field") {
    const SchemaError e = schema_error(replace(kMinimal, "initial_state: [1]\n", ""));
    CHECK(e.field() == "initial_state");
  }
  SUBCASE("wrong format version") {
    const SchemaError e = schema_error(replace(kMinimal, "format: 1", "format: 2"));
    CHECK(e.field() == "format");
    CHECK(e.line() == 1);
  }
  SUBCASE("unknown family") {
    const SchemaError e = schema_error(replace(kMinimal, "family: linear", "family: cubic"));
    CHECK(e.field() == "dynamics.family");
    CHECK(e.line() == 6);
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
  }
  SUBCASE("ragged matrix") {
    const SchemaError e = schema_error(replace(kMinimal, "A: [[0.5]]", "A: [[0.5, 1]]"));
    CHECK(e.field().find("dynamics.A") == 0);
    CHECK(e.line() == 7);
  }
  SUBCASE("non-numeric entry") {
    const SchemaError e = schema_error(replace(kMinimal, "R: [[1]]", "R: [[one]]"));
    CHECK(e.field().find("reward.R") == 0);
    CHECK(e.line() == 12);
  }
  SUBCASE("empty box") {
    const SchemaError e = schema_error(replace(kMinimal, "lower: [-1]", "lower: [2]"));
    CHECK(e.field().find("control_set") == 0);
  }
  SUBCASE("not YAML at all") {
    const SchemaError e = schema_error("format: [1\n");
    CHECK(e.line() >= 1);
  }
}

TEST_CASE("infeasible references are rejected on load") {
  const auto path = scratch("bad-reference.yaml");
  std::ofstream(path) << replace(kMinimal, "states: [[1], [0.5], [0.25]]", "states: [[1], [0.5], [0.3]]");
  CHECK_THROWS_AS(load(path), SchemaError);

  const auto outside = scratch("bad-control.yaml");
  std::ofstream(outside) << replace(replace(kMinimal, "controls: [[0], [0]]", "controls: [[2], [0]]"),
                                    "states: [[1], [0.5], [0.25]]", "states: [[1], [2.5], [1.25]]");
  CHECK_THROWS_AS(load(outside), SchemaError);

  CHECK_THROWS_AS(load(scratch("does-not-exist.yaml")), Error);
  CHECK_THROWS_AS(resolve_instance("no-such-builtin"), UnknownInstanceError);
}

TEST_CASE("stage overrides replace single stages") {
  const std::string text = replace(kMinimal, "  B: [[1]]\n", "  B: [[1]]\n  stages:\n    - {t: 1, B: [[2]]}\n");
  const ProblemDefinition def = parse_yaml(replace(text, "states: [[1], [0.5], [0.25]]", "states: [[1], [0.5], [0.25]]"));
  CHECK(def.dynamics.B_at(0)(0, 0) == 1.0);
  CHECK(def.dynamics.B_at(1)(0, 0) == 2.0);
  CHECK(def.dynamics.B_at(7)(0, 0) == 1.0);
  CHECK(identical(parse_yaml(to_yaml(def)), def));
}

TEST_CASE("DARE solution satisfies the Riccati equation") {
  Gen gen(902);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.integer(1, 4), m = gen.integer(1, 3);
    const Matrix a = 0.6 * gen.matrix(n, n) / std::sqrt(static_cast<double>(n));
    const Matrix b = gen.matrix(n, m);
    const Matrix q = Matrix::Identity(n, n), r = Matrix::Identity(m, m);
    const Matrix p = solve_dare(a, b, q, r);
    const Matrix residual =
        a.transpose() * p * a - p + q -
        a.transpose() * p * b * (r + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
    CHECK(residual.norm() <= 1e-10 * (1 + p.norm()));
    CHECK((p - p.transpose()).norm() <= 1e-12 * (1 + p.norm()));
  }
}

TEST_CASE("box QP satisfies its KKT conditions") {
  Gen gen(903);
  for (int trial = 0; trial < 40; ++trial) {
    const Index m = gen.integer(1, 6);
    const Matrix f = gen.matrix(m, m);
    const Matrix h = f * f.transpose() + 0.1 * Matrix::Identity(m, m);
    const Vector g = 3.0 * gen.vector(m);
    const Vector lo = -Vector::Ones(m), hi = Vector::Ones(m);
    const Vector u = solve_box_qp(h, g, lo, hi);
    const Vector grad = h * u + g;
    for (Index i = 0; i < m; ++i) {
      CHECK(u(i) >= lo(i) - 1e-12);
      CHECK(u(i) <= hi(i) + 1e-12);
      if (u(i) > lo(i) + 1e-9 && u(i) < hi(i) - 1e-9) CHECK(std::abs(grad(i)) <= 1e-9);
      if (u(i) <= lo(i) + 1e-9) CHECK(grad(i) >= -1e-9);
      if (u(i) >= hi(i) - 1e-9) CHECK(grad(i) <= 1e-9);
    }
  }
}

TEST_CASE("build_system rejects inconsistent data") {
  auto def = parse_yaml(kMinimal);
  def.dynamics.B = mat({{1, 2}});
  CHECK_THROWS_AS(build_system(def), DimensionError);

  auto growth = parse_yaml(kMinimal);
  growth.dynamics.family = DynamicsFamily::growth;
  growth.state_dim = 2;
  CHECK_THROWS_AS(build_system(growth), DimensionError);
}

TEST_CASE("enum names") {
  CHECK(to_string(DynamicsFamily::growth) == "growth");
  CHECK(to_string(RewardFamily::log) == "log");
  CHECK(to_string(OracleKind::brute_force_qp) == "brute_force_qp");
}
