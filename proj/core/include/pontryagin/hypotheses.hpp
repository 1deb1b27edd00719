#pragma once

#include "pontryagin/model.hpp"
#include "pontryagin/polyhedral_set.hpp"
#include "pontryagin/types.hpp"

#include <string>
#include <vector>

namespace pontryagin {

enum class Verdict { pass, fail, automatic, not_checked };

std::string to_string(Verdict v);

struct Check {
  std::string name;
  Index t = -1;  // -1 when the check is not stage-indexed
  Verdict verdict = Verdict::not_checked;
  double margin = 0.0;
  std::string note;
};

/// Whether span(subspace) + cone(rays) equals R^n, decided by splitting off
/// the subspace S and testing that the rays projected onto the complement of
/// S positively span it.
struct ConeCoverage {
  bool covers = false;
  Index subspace_dim = 0;
  double subspace_margin = 0.0;  // smallest retained singular value of S's generators
  /// l-infinity inradius of conv(projected rays) around 0; 0 if not interior.
  double cone_margin = 0.0;
  Matrix complement;         // orthonormal basis of S-perp
  Matrix projected_rays;     // complement^T * rays
};

ConeCoverage conic_sum_covers(const Matrix& subspace_generators, const Matrix& ray_generators,
                              Index dim, double rank_tolerance = kDefaultRankTol);

/// A_t B_{t-1}(U) + B_t(T_{U_t}(u_t)) = R^n.
Check check_H4(const LinearizedStage& prev, const LinearizedStage& stage,
               const PolyhedralSet& cone, double rank_tolerance = kDefaultRankTol);

/// A_1 B_0(T_{U_0}(u_0)) + B_1(T_{U_1}(u_1)) = R^n.
Check check_H5(const LinearizedStage& stage0, const LinearizedStage& stage1,
               const PolyhedralSet& cone0, const PolyhedralSet& cone1,
               double rank_tolerance = kDefaultRankTol);

/// H6 holds automatically in finite dimension; the margin field carries the
/// affine-hull dimension of the cone.
Check check_H6(const PolyhedralSet& cone0, const PolyhedralSet& cone1);

struct RangeConditions {
  Check closed_image;
  std::vector<Check> range_sum;  // t = 1..cap
  std::vector<Check> stage_onto;  // t = 2..cap
  Check initial_onto;
};

/// stages[t] is the linearization at t = 0..cap.
RangeConditions check_range_conditions(const std::vector<LinearizedStage>& stages,
                                   double rank_tolerance = kDefaultRankTol);

struct HypothesisReport {
  Index cap = 0;
  bool stationary = false;
  Check H1;
  Check H2;
  Check H3;
  std::vector<Check> H4;  // t = 2..cap
  Check H5;
  Check H6;
  RangeConditions ranges;

  /// Worst verdict of a family: "H4", "range_sum", "stage_onto" aggregate over t.
  Verdict aggregate(const std::string& name) const;
  std::vector<Check> all_checks() const;
};

struct HypothesisOptions {
  Index cap = 50;
  double rank_tolerance = kDefaultRankTol;
  LinearizeOptions linearize;
  /// Marks the system as stationary in the report notes.
  bool stationary = false;
};

/// Runs every check at the reference up to min(cap, reference.length() - 1).
HypothesisReport check_hypotheses(const ControlSystem& system, const Process& reference,
                                  const HypothesisOptions& options = {});

}  // namespace pontryagin
