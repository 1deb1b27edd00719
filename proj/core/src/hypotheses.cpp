#include "pontryagin/hypotheses.hpp"

#include "pontryagin/linalg.hpp"
#include "pontryagin/lp.hpp"
#include "pontryagin/operator_analysis.hpp"

#include <algorithm>
#include <string>

namespace pontryagin {
namespace {

constexpr Index kMaxSignEnumeration = 16;

// Largest rho with rho * s in conv(columns of p); -inf if the line R s misses
// the hull.
double hull_extent(const Matrix& p, const Vector& s) {
  const Index k = p.rows();
  const Index r = p.cols();
  lp::LinearProgram prog;
  prog.objective = Vector::Zero(r + 1);
  prog.objective(r) = 1.0;
  prog.eq_matrix = Matrix::Zero(k + 1, r + 1);
  prog.eq_matrix.topLeftCorner(k, r) = p;
  prog.eq_matrix.block(0, r, k, 1) = -s;
  prog.eq_matrix.bottomLeftCorner(1, r).setOnes();
  prog.eq_rhs = Vector::Zero(k + 1);
  prog.eq_rhs(k) = 1.0;
  prog.free_variable.assign(static_cast<std::size_t>(r + 1), false);
  prog.free_variable.back() = true;
  const auto sol = lp::solve(prog);
  if (sol.status == lp::Status::infeasible) return -kInfinity;
  return sol.value;
}

Check make(std::string name, Index t, Verdict v, double margin, std::string note) {
  return Check{std::move(name), t, v, margin, std::move(note)};
}

Check coverage_check(std::string name, Index t, const ConeCoverage& cov) {
  double margin = 0.0;
  if (cov.covers) {
    const bool has_cone = cov.complement.cols() > 0;
    const bool has_sub = cov.subspace_dim > 0;
    if (has_cone && has_sub) margin = std::min(cov.subspace_margin, cov.cone_margin);
    else if (has_cone) margin = cov.cone_margin;
    else margin = cov.subspace_margin;
  }
  std::string note = "subspace part dim " + std::to_string(cov.subspace_dim) + ", complement dim " +
                     std::to_string(cov.complement.cols());
  if (cov.complement.cols() > 0) {
    note += cov.covers ? ", projected rays positively span the complement"
                       : ", projected rays do not positively span the complement";
  }
  return make(std::move(name), t, cov.covers ? Verdict::pass : Verdict::fail, margin, note);
}

Matrix df(const LinearizedStage& s) {
  Matrix out(s.A.rows(), s.A.cols() + s.B.cols());
  out << s.A, s.B;
  return out;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::automatic: return "automatic";
    case Verdict::not_checked: return "not-checked";
  }
  return "not-checked";
}

ConeCoverage conic_sum_covers(const Matrix& subspace_generators, const Matrix& ray_generators,
                              Index dim, double rank_tolerance) {
  if ((subspace_generators.cols() > 0 && subspace_generators.rows() != dim) ||
      (ray_generators.cols() > 0 && ray_generators.rows() != dim)) {
    throw DimensionError("conic_sum_covers: generator dimension mismatch");
  }
  ConeCoverage out;
  Matrix s_basis(dim, 0);
  if (subspace_generators.cols() > 0) {
    const RangeReport rr = range_report(subspace_generators, rank_tolerance);
    s_basis = rr.range_basis;
    out.subspace_dim = rr.numerical_rank;
    out.subspace_margin = rr.smallest_positive_singular_value;
  }
  out.complement = linalg::complement_basis(s_basis, dim, rank_tolerance);
  const Index k = out.complement.cols();
  if (k == 0) {
    out.covers = true;
    out.projected_rays = Matrix(0, ray_generators.cols());
    return out;
  }

  const Matrix projected = ray_generators.cols() > 0
                               ? Matrix(out.complement.transpose() * ray_generators)
                               : Matrix(k, 0);
  std::vector<Index> keep;
  for (Index j = 0; j < projected.cols(); ++j) {
    if (projected.col(j).norm() > 1e-12) keep.push_back(j);
  }
  out.projected_rays.resize(k, static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.projected_rays.col(static_cast<Index>(j)) = projected.col(keep[j]);
  }
  if (out.projected_rays.cols() <= k) return out;  // need at least k+1 rays
  if (k > kMaxSignEnumeration) {
    throw Error("conic_sum_covers: complement dimension too large for sign enumeration");
  }

  double radius = kInfinity;
  const std::size_t count = std::size_t{1} << static_cast<std::size_t>(k);
  for (std::size_t mask = 0; mask < count && radius > 0.0; ++mask) {
    Vector s(k);
    for (Index i = 0; i < k; ++i) s(i) = (mask >> static_cast<std::size_t>(i)) & 1U ? -1.0 : 1.0;
    radius = std::min(radius, hull_extent(out.projected_rays, s));
  }
  out.cone_margin = std::max(radius, 0.0);
  out.covers = radius > 1e-10;
  return out;
}

Check check_H4(const LinearizedStage& prev, const LinearizedStage& stage,
               const PolyhedralSet& cone, double rank_tolerance) {
  const Index n = stage.A.rows();
  if (prev.B.rows() != n || stage.A.cols() != n || stage.B.rows() != n ||
      cone.dim() != stage.B.cols()) {
    throw DimensionError("check_H4: dimension mismatch");
  }
  const auto gens = decompose_cone(cone);
  const Matrix sub = linalg::hstack(stage.A * prev.B, stage.B * gens.lineality);
  const Matrix rays = gens.rays.cols() > 0 ? Matrix(stage.B * gens.rays) : Matrix(n, 0);
  return coverage_check("H4", stage.t, conic_sum_covers(sub, rays, n, rank_tolerance));
}

Check check_H5(const LinearizedStage& stage0, const LinearizedStage& stage1,
               const PolyhedralSet& cone0, const PolyhedralSet& cone1, double rank_tolerance) {
  const Index n = stage1.A.rows();
  if (stage0.B.rows() != n || stage1.B.rows() != n || cone0.dim() != stage0.B.cols() ||
      cone1.dim() != stage1.B.cols()) {
    throw DimensionError("check_H5: dimension mismatch");
  }
  const auto g0 = decompose_cone(cone0);
  const auto g1 = decompose_cone(cone1);
  const Matrix ab = stage1.A * stage0.B;
  const Matrix sub = linalg::hstack(Matrix(ab * g0.lineality), Matrix(stage1.B * g1.lineality));
  const Matrix rays = linalg::hstack(Matrix(ab * g0.rays), Matrix(stage1.B * g1.rays));
  return coverage_check("H5", -1, conic_sum_covers(sub, rays.cols() > 0 ? rays : Matrix(n, 0), n,
                                                   rank_tolerance));
}

Check check_H6(const PolyhedralSet& cone0, const PolyhedralSet& cone1) {
  const Index d0 = decompose_cone(cone0).span_dim();
  const Index d1 = decompose_cone(cone1).span_dim();
  return make("H6", -1, Verdict::automatic, static_cast<double>(std::min(d0, d1)),
              "relative interiors are nonempty in finite dimension; affine hull dimensions " +
                  std::to_string(d0) + " and " + std::to_string(d1));
}

RangeConditions check_range_conditions(const std::vector<LinearizedStage>& stages,
                                   double rank_tolerance) {
  if (stages.size() < 2) throw DimensionError("check_range_conditions: need stages 0..cap, cap >= 1");
  const auto cap = static_cast<Index>(stages.size()) - 1;
  const Index n = stages.front().A.rows();
  RangeConditions out;

  double min_sigma = kInfinity;
  for (const auto& s : stages) {
    min_sigma = std::min(min_sigma, range_report(df(s), rank_tolerance).smallest_positive_singular_value);
  }
  out.closed_image = make("closed_image", -1, Verdict::automatic, min_sigma,
                  "ranges of finite-dimensional linear maps are closed");

  for (Index t = 1; t <= cap; ++t) {
    const auto& s = stages[static_cast<std::size_t>(t)];
    const Matrix ab = s.A * stages[static_cast<std::size_t>(t - 1)].B;
    const auto rs = sum_of_ranges_equals(ab, s.B, df(s), rank_tolerance);
    const double margin = range_report(linalg::hstack(ab, s.B), rank_tolerance).smallest_positive_singular_value;
    out.range_sum.push_back(make("range_sum", t, rs.equal ? Verdict::pass : Verdict::fail, rs.equal ? margin : 0.0,
                            "rank of sum " + std::to_string(rs.sum_rank) + ", rank of Df_t " +
                                std::to_string(rs.target_rank)));
  }
  for (Index t = 2; t <= cap; ++t) {
    const RangeReport rr = range_report(df(stages[static_cast<std::size_t>(t)]), rank_tolerance);
    out.stage_onto.push_back(make("stage_onto", t, rr.surjective ? Verdict::pass : Verdict::fail,
                            rr.surjective ? rr.smallest_positive_singular_value : 0.0,
                            "rank " + std::to_string(rr.numerical_rank) + " of " + std::to_string(n)));
  }
  const auto rs = sum_of_ranges_equals(stages[1].A * stages[0].B, stages[1].B, std::nullopt, rank_tolerance);
  const double margin =
      range_report(linalg::hstack(stages[1].A * stages[0].B, stages[1].B), rank_tolerance)
          .smallest_positive_singular_value;
  out.initial_onto = make("initial_onto", -1, rs.equal ? Verdict::pass : Verdict::fail, rs.equal ? margin : 0.0,
                  "rank " + std::to_string(rs.sum_rank) + " of " + std::to_string(n));
  return out;
}

Verdict HypothesisReport::aggregate(const std::string& name) const {
  const std::vector<Check>* family = nullptr;
  if (name == "H4") family = &H4;
  else if (name == "range_sum") family = &ranges.range_sum;
  else if (name == "stage_onto") family = &ranges.stage_onto;
  if (family == nullptr) {
    for (const auto& c : all_checks()) {
      if (c.name == name) return c.verdict;
    }
    throw Error("HypothesisReport: unknown check '" + name + "'");
  }
  if (family->empty()) return Verdict::not_checked;
  bool all_auto = true;
  for (const auto& c : *family) {
    if (c.verdict == Verdict::fail) return Verdict::fail;
    all_auto = all_auto && c.verdict == Verdict::automatic;
  }
  return all_auto ? Verdict::automatic : Verdict::pass;
}

std::vector<Check> HypothesisReport::all_checks() const {
  std::vector<Check> out{H1, H2, H3};
  out.insert(out.end(), H4.begin(), H4.end());
  out.push_back(H5);
  out.push_back(H6);
  out.push_back(ranges.closed_image);
  out.insert(out.end(), ranges.range_sum.begin(), ranges.range_sum.end());
  out.insert(out.end(), ranges.stage_onto.begin(), ranges.stage_onto.end());
  out.push_back(ranges.initial_onto);
  return out;
}

HypothesisReport check_hypotheses(const ControlSystem& system, const Process& reference,
                                  const HypothesisOptions& options) {
  const Index cap = std::min(options.cap, reference.length() - 1);
  if (cap < 1) throw DimensionError("check_hypotheses: reference needs at least two stages");
  HypothesisReport out;
  out.cap = cap;
  out.stationary = options.stationary;

  out.H1 = make("H1", -1, Verdict::automatic, 0.0, "finite-dimensional spaces are separable");
  bool boxes = true;
  for (Index t = 0; t <= cap + 1 && boxes; ++t) {
    // Only box / all-space descriptors exist, and both are open.
    boxes = system.state_domain(t).dim() == system.state_dim();
  }
  out.H2 = make("H2", -1, boxes ? Verdict::pass : Verdict::not_checked, 0.0,
                "X_t are open boxes or the whole space; U_t are nonempty convex polyhedra");

  std::vector<LinearizedStage> stages;
  std::vector<PolyhedralSet> cones;
  try {
    for (Index t = 0; t <= cap; ++t) {
      stages.push_back(linearize(system, reference, t, options.linearize));
      cones.push_back(tangent_cone(system.control_set(t), reference.control(t)));
    }
  } catch (const NonFiniteError& e) {
    out.H3 = make("H3", -1, Verdict::fail, 0.0, e.what());
    return out;
  }
  out.H3 = make("H3", -1, Verdict::pass, 0.0,
                system.has_derivatives() ? "analytic derivatives are finite at every checked stage"
                                         : "central differences are finite at every checked stage");

  for (Index t = 2; t <= cap; ++t) {
    out.H4.push_back(check_H4(stages[static_cast<std::size_t>(t - 1)], stages[static_cast<std::size_t>(t)],
                              cones[static_cast<std::size_t>(t)], options.rank_tolerance));
    if (options.stationary) out.H4.back().note += "; stationary data, the stage check covers all t";
  }
  out.H5 = check_H5(stages[0], stages[1], cones[0], cones[1], options.rank_tolerance);
  out.H6 = check_H6(cones[0], cones[1]);
  out.ranges = check_range_conditions(stages, options.rank_tolerance);
  return out;
}

}  // namespace pontryagin
