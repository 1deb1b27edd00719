#include <doctest.h>

#include "generators.hpp"
#include "pontryagin/finite_horizon.hpp"
#include "pontryagin/instances.hpp"
#include "pontryagin/limit_analysis.hpp"
#include "pontryagin/linalg.hpp"
#include "pontryagin/verifier.hpp"

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

PolyhedralSet half_line(double sign) {
  return sign > 0 ? PolyhedralSet::box(vec({0}), vec({kInfinity}))
                  : PolyhedralSet::box(vec({-kInfinity}), vec({0}));
}

MultiplierSet raw_set(double lambda0, Vector p1, Vector p2, const Matrix& b0, const Matrix& b1) {
  MultiplierSet ms;
  ms.h = 1;
  ms.lambda0 = lambda0;
  ms.q1 = b0.transpose() * p1;
  ms.q2 = b1.transpose() * p2;
  ms.p = {std::move(p1), std::move(p2)};
  return ms;
}

SweepRecord run_sweep(const std::string& name, Index h_max, Index t_max = 0) {
  const InstanceBundle b = builtin(name);
  SweepOptions opts;
  opts.h_max = h_max;
  opts.t_max = t_max;
  return sweep(b.system, b.reference, opts);
}

}  // namespace

TEST_CASE("normalize divides by theta") {
  const Matrix b = Matrix::Identity(1, 1);
  const PolyhedralSet all = PolyhedralSet::all_space(1);

  // lambda0 = 2 with restricted norm 2.
  const MultiplierSet ms = raw_set(2.0, vec({2.0}), vec({0.0}), b, b);
  CHECK(restricted_norm(ms, sigma_basis(all, all)) == doctest::Approx(2.0));
  const MultiplierSet n = normalize(ms, all, all);
  CHECK(n.lambda0 == doctest::Approx(0.5));
  CHECK(restricted_norm(n, sigma_basis(all, all)) == doctest::Approx(0.5));
  CHECK(n.normalized);
  CHECK(n.costate(1)(0) == doctest::Approx(0.5));

  // Already normalized: lambda0 = 1, q = 0.
  const MultiplierSet one = raw_set(1.0, vec({0.0}), vec({0.0}), b, b);
  const MultiplierSet same = normalize(one, all, all);
  CHECK(same.lambda0 == 1.0);
  CHECK(same.costate(1)(0) == 0.0);

  CHECK_THROWS_AS(normalize(raw_set(0.0, vec({0.0}), vec({0.0}), b, b), all, all),
                  DegenerateMultiplierError);
}

TEST_CASE("sigma is the product of the cone spans") {
  const PolyhedralSet zero = PolyhedralSet::box(vec({0, 0}), vec({0, 0}));
  const PolyhedralSet line = PolyhedralSet::box(vec({0, -kInfinity}), vec({0, kInfinity}));
  const Matrix s = sigma_basis(zero, line);
  REQUIRE(s.rows() == 4);
  CHECK(s.cols() == 1);
  CHECK(std::abs(s(3, 0)) == doctest::Approx(1.0));

  // q restricted to Sigma ignores components orthogonal to the spans.
  const Matrix b = Matrix::Identity(2, 2);
  const MultiplierSet ms = raw_set(0.0, vec({5, 5}), vec({7, 1}), b, b);
  CHECK(restricted_norm(ms, s) == doctest::Approx(1.0));
}

TEST_CASE("normalized LQ multipliers still pass the verifier") {
  const InstanceBundle b = builtin("lq-stable");
  const TruncatedProblem problem = truncate(b.system, b.reference, 10);
  const ConstraintLinearization lin = assemble_constraints(problem);
  const MultiplierSet raw = compute_multipliers(problem, lin);
  const auto cones = reference_cones(problem);
  const MultiplierSet n = normalize(raw, cones[0], cones[1]);
  const Matrix sigma = sigma_basis(cones[0], cones[1]);
  CHECK(std::abs(n.lambda0 + restricted_norm(n, sigma) - 1.0) <= 1e-10);
  for (double r : adjoint_residuals(n, lin.blocks)) CHECK(r <= 1e-8);

  const VerificationReport before = verify(b.system, b.reference, raw.lambda0, raw.p, 10);
  const VerificationReport after = verify(b.system, b.reference, n.lambda0, n.p, 10);
  CHECK(before.overall);
  CHECK(after.overall);
  CHECK(before.cond1_nontrivial == after.cond1_nontrivial);
  CHECK(before.cond2_sign == after.cond2_sign);
  CHECK(before.cond3_pass == after.cond3_pass);
  CHECK(before.cond4_pass == after.cond4_pass);
}

TEST_CASE("verifier verdicts survive normalization on every builtin") {
  for (const std::string& name : builtin_names()) {
    CAPTURE(name);
    const InstanceBundle b = builtin(name);
    for (Index h : {3, 7}) {
      const TruncatedProblem problem = truncate(b.system, b.reference, h);
      const ConstraintLinearization lin = assemble_constraints(problem);
      const MultiplierSet raw = compute_multipliers(problem, lin);
      const auto cones = reference_cones(problem);
      const MultiplierSet n = normalize(raw, cones[0], cones[1]);
      const VerificationReport a = verify(b.system, b.reference, raw.lambda0, raw.p, h);
      const VerificationReport c = verify(b.system, b.reference, n.lambda0, n.p, h);
      CHECK(a.overall == c.overall);
      CHECK(a.first_failure == c.first_failure);
    }
  }
}

TEST_CASE("sweep bookkeeping for H_max = 3 and t_max = 1") {
  const SweepRecord r = run_sweep("lq-stable", 3, 1);
  CHECK(r.horizons == std::vector<Index>{2, 3});
  CHECK(r.multipliers.size() == 2);
  CHECK(r.per_t.size() == 1);
  CHECK(r.per_t[0].t == 1);
  CHECK(r.per_t[0].diffs.size() == 1);
  CHECK(r.t_max == 1);
  CHECK(r.gaps.empty());
}

TEST_CASE("default t_max is half of H_max") {
  const SweepRecord r = run_sweep("lq-stable", 12);
  CHECK(r.t_max == 6);
  CHECK(r.per_t.size() == 6);
  CHECK(r.limit_p.size() == 6);
}

TEST_CASE("sweep rejects bad ranges") {
  const InstanceBundle b = builtin("lq-stable");
  SweepOptions opts;
  opts.h_max = 2;
  CHECK_THROWS(sweep(b.system, b.reference, opts));
  opts.h_max = 5;
  opts.t_max = 5;
  CHECK_THROWS(sweep(b.system, b.reference, opts));
}

TEST_CASE("sweep records satisfy the normalization identity") {
  for (const std::string& name : builtin_names()) {
    CAPTURE(name);
    const SweepRecord r = run_sweep(name, 10);
    CHECK(r.gaps.empty());
    const SubspaceNormReport s = subspace_norm_convergence(r, r.sigma);
    CHECK(s.identity_holds);
    CHECK(s.nonvanishing);
    for (double e : s.identity_errors) CHECK(e <= 1e-10);
    for (const MultiplierSet& ms : r.multipliers) {
      CHECK(ms.normalized);
      CHECK(std::abs(ms.lambda0 + restricted_norm(ms, r.sigma) - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("contractive LQ sweep converges to the Riccati fixed point") {
  const InstanceBundle b = builtin("lq-stable");
  SweepOptions opts;
  opts.h_max = 24;
  opts.t_max = 8;
  const SweepRecord r = sweep(b.system, b.reference, opts);
  for (const ConvergenceSeries& s : r.per_t) {
    CHECK(s.cauchy);
    CHECK(s.eventually_monotone);
  }
  // Oracle: Riccati costates at the largest horizon, normalized the same way.
  const std::vector<Vector> oracle = riccati_oracle(b, 24);
  const double theta = 1.0 / r.multipliers.back().lambda0;
  for (Index t = 1; t <= 8; ++t) {
    const Vector& want = oracle[static_cast<std::size_t>(t - 1)];
    CHECK((theta * r.limit_p[static_cast<std::size_t>(t - 1)] - want).norm() <= 1e-6 * std::max(1.0, want.norm()));
  }
  CHECK(r.nontriviality_margin > 0.0);
  CHECK(r.costate_margin >= r.limit_lambda0);
}

TEST_CASE("the growth sweep has geometrically decaying differences") {
  const SweepRecord r = run_sweep("ramsey-growth", 20, 6);
  for (const ConvergenceSeries& s : r.per_t) {
    CHECK(s.cauchy);
    CHECK(s.eventually_monotone);
  }
}

TEST_CASE("inert controls give identical abnormal multipliers at every horizon") {
  const SweepRecord r = run_sweep("inert-control-abnormal", 10);
  for (const MultiplierSet& ms : r.multipliers) CHECK(ms.lambda0 == 0.0);
  for (const ConvergenceSeries& s : r.per_t) {
    for (double d : s.diffs) CHECK(d <= 1e-12);
    CHECK(s.cauchy);
  }
  const SubspaceNormReport s = subspace_norm_convergence(r, r.sigma);
  for (double n : s.restricted_norms) CHECK(n == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.nonvanishing);
}

TEST_CASE("interior fixtures drive restricted norms to zero") {
  // Interior controls with d = 0 at every stage: q vanishes identically.
  auto def = testing::linear_definition(mat({{0.5}}), mat({{1}}), mat({{1}}), mat({{1}}));
  def.initial_state = vec({0});
  const InstanceBundle b = testing::bundle_from_controls(def, std::vector<Vector>(20, vec({0})));
  SweepOptions opts;
  opts.h_max = 8;
  const SweepRecord r = sweep(b.system, b.reference, opts);
  const SubspaceNormReport s = subspace_norm_convergence(r, r.sigma);
  for (const MultiplierSet& ms : r.multipliers) CHECK(ms.lambda0 == doctest::Approx(1.0));
  for (double n : s.restricted_norms) CHECK(n <= 1e-12);
}

TEST_CASE("limit nontriviality follows from the identity and the operator norms") {
  for (const std::string& name : builtin_names()) {
    CAPTURE(name);
    const InstanceBundle b = builtin(name);
    const SweepRecord r = run_sweep(name, 8);
    const MultiplierSet& last = r.multipliers.back();
    const double b0 = linalg::spectral_norm(b.system.derivatives(0, b.reference.state(0), b.reference.control(0)).B);
    const double b1 = linalg::spectral_norm(b.system.derivatives(1, b.reference.state(1), b.reference.control(1)).B);
    CHECK(last.q1.norm() <= last.costate(1).norm() * b0 * (1 + 1e-12) + 1e-15);
    CHECK(last.q2.norm() <= last.costate(2).norm() * b1 * (1 + 1e-12) + 1e-15);
    CHECK(r.costate_margin > 0.0);
    // 1 = lambda0 + ||q|_Sigma|| <= lambda0 + max(1, ||B||) (||p_1|| + ||p_2||)
    CHECK(1.0 <= r.limit_lambda0 + std::max({1.0, b0, b1}) * (last.costate(1).norm() + last.costate(2).norm()) + 1e-10);
  }
}

TEST_CASE("multiplier bounds with zero samples are zero") {
  const SweepRecord r = run_sweep("lq-stable", 8);
  const MultiplierBoundReport rep = check_multiplier_bounds(r, {{Vector::Zero(2), Vector::Zero(2)}});
  CHECK(rep.applicable);
  REQUIRE(rep.sup_ratio.size() == 1);
  CHECK(rep.sup_ratio[0] == 0.0);
  CHECK(rep.bounded);
}

TEST_CASE("multiplier bounds stabilize on the LQ sweep") {
  const InstanceBundle b = builtin("lq-stable");
  SweepOptions opts;
  opts.h_max = 24;
  const SweepRecord r = sweep(b.system, b.reference, opts);
  Gen gen(701);
  std::vector<std::pair<Vector, Vector>> samples;
  const Matrix b0 = b.definition.dynamics.B;
  for (int k = 0; k < 8; ++k) samples.emplace_back(b0 * gen.vector(1), b0 * gen.vector(1));
  const MultiplierBoundReport rep = check_multiplier_bounds(r, samples);
  CHECK(rep.applicable);
  CHECK(rep.bounded);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(std::isfinite(rep.sup_ratio[i]));
    const auto& row = rep.ratios[i];
    const std::size_t quarter = row.size() - row.size() / 4;
    double lo = kInfinity, hi = -kInfinity;
    for (std::size_t k = quarter; k < row.size(); ++k) {
      lo = std::min(lo, row[k]);
      hi = std::max(hi, row[k]);
    }
    CHECK(hi - lo <= 1e-6);
  }
}

TEST_CASE("multiplier bounds are not applicable on the abnormal branch") {
  const SweepRecord r = run_sweep("inert-control-abnormal", 6);
  const MultiplierBoundReport rep = check_multiplier_bounds(r, {{vec({1}), vec({1})}});
  CHECK_FALSE(rep.applicable);
  CHECK(rep.note.find("abnormal") != std::string::npos);
}

TEST_CASE("decomposition examples") {
  const LinearizedStage s0 = stage(0, mat({{1}}), mat({{1}}));
  const LinearizedStage s1 = stage(1, mat({{1}}), mat({{1}}));

  const DecompositionWitness zero = decompose_v(vec({0}), s0, s1, half_line(1), half_line(-1));
  CHECK(zero.feasible);
  CHECK(zero.zeta0.norm() == 0.0);
  CHECK(zero.zeta1.norm() == 0.0);

  const DecompositionWitness neg = decompose_v(vec({-3}), s0, s1, half_line(1), half_line(-1));
  CHECK(neg.feasible);
  CHECK(neg.zeta0(0) == doctest::Approx(0.0));
  CHECK(neg.zeta1(0) == doctest::Approx(-3.0));
  CHECK(neg.z1(0) == doctest::Approx(-3.0));

  // Whole-space cones: any least-squares solution of the linear system.
  Gen gen(702);
  const LinearizedStage r0 = stage(0, gen.matrix(2, 2), gen.matrix(2, 2));
  const LinearizedStage r1 = stage(1, gen.matrix(2, 2), gen.matrix(2, 2));
  const Vector v = gen.vector(2);
  const DecompositionWitness w =
      decompose_v(v, r0, r1, PolyhedralSet::all_space(2), PolyhedralSet::all_space(2));
  CHECK(w.feasible);
  CHECK((r1.A * r0.B * w.zeta0 + r1.B * w.zeta1 - v).norm() <= 1e-8);

  // Same-sign cones cannot reach negative v.
  const DecompositionWitness bad = decompose_v(vec({-1}), s0, s1, half_line(1), half_line(1));
  CHECK_FALSE(bad.feasible);
  CHECK(bad.residual == doctest::Approx(1.0));
}

TEST_CASE("decomposition witnesses are sound") {
  Gen gen(703);
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = gen.integer(1, 3), m = gen.integer(1, 3);
    const LinearizedStage s0 = stage(0, gen.matrix(n, n), gen.matrix(n, m));
    const LinearizedStage s1 = stage(1, gen.matrix(n, n), gen.matrix(n, m));
    const PolyhedralSet c0 = gen.coin() ? PolyhedralSet::all_space(m) : gen.polytope(m, 1).as_half_spaces();
    const PolyhedralSet cone0 = tangent_cone(c0, gen.boundary_point(c0, Vector::Zero(m)));
    const PolyhedralSet cone1 = tangent_cone(gen.box(m), Vector::Zero(m));
    const Vector v = gen.vector(n);
    const DecompositionWitness w = decompose_v(v, s0, s1, cone0, cone1);
    CHECK(w.residual == doctest::Approx((v - s1.A * w.z0 - w.z1).norm()).epsilon(1e-9));
    CHECK((w.z0 - s0.B * w.zeta0).norm() <= 1e-12 * (1 + w.z0.norm()));
    CHECK((w.z1 - s1.B * w.zeta1).norm() <= 1e-12 * (1 + w.z1.norm()));
    CHECK(cone0.contains(w.zeta0, 1e-9 * (1 + w.zeta0.norm())));
    CHECK(cone1.contains(w.zeta1, 1e-9 * (1 + w.zeta1.norm())));
    if (w.feasible) CHECK(w.residual <= 1e-8);
  }
}

TEST_CASE("sweep is deterministic across thread counts") {
  const InstanceBundle b = builtin("lq-boundary-control");
  SweepOptions one;
  one.h_max = 12;
  one.threads = 1;
  SweepOptions many = one;
  many.threads = 4;
  const SweepRecord a = sweep(b.system, b.reference, one);
  const SweepRecord c = sweep(b.system, b.reference, many);
  REQUIRE(a.multipliers.size() == c.multipliers.size());
  for (std::size_t k = 0; k < a.multipliers.size(); ++k) {
    CHECK(a.multipliers[k].lambda0 == c.multipliers[k].lambda0);
    for (std::size_t t = 0; t < a.multipliers[k].p.size(); ++t) {
      CHECK(linalg::identical(a.multipliers[k].p[t], c.multipliers[k].p[t]));
    }
  }
}
