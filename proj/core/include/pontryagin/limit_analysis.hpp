#pragma once

#include "pontryagin/finite_horizon.hpp"
#include "pontryagin/model.hpp"
#include "pontryagin/polyhedral_set.hpp"

#include <string>
#include <utility>
#include <vector>

namespace pontryagin {

/// Orthonormal basis of Sigma = span(T_0) x span(T_1) in U x U.
Matrix sigma_basis(const PolyhedralSet& cone0, const PolyhedralSet& cone1);

/// ||(q1, q2)|| restricted to Sigma (norm of the orthogonal projection).
double restricted_norm(const MultiplierSet& ms, const Matrix& sigma);

/// Divides the multipliers by theta = lambda0 + ||(q1, q2)|_Sigma||.
/// Throws DegenerateMultiplierError when theta <= 1e-12.
MultiplierSet normalize(const MultiplierSet& ms, const PolyhedralSet& cone0,
                        const PolyhedralSet& cone1);

struct ConvergenceSeries {
  Index t = 0;
  /// diffs[k] = ||p_t^{h_{k+1}} - p_t^{h_k}|| over consecutive horizons.
  std::vector<double> diffs;
  bool cauchy = false;
  /// Last-quarter differences are non-increasing up to `monotone_floor`.
  bool eventually_monotone = false;
};

struct HorizonGap {
  Index h = 0;
  std::string reason;
};

struct SweepOptions {
  Index h_max = 20;
  Index t_max = 0;  // 0 selects h_max / 2
  double cauchy_tolerance = 1e-6;
  double monotone_floor = 1e-12;
  unsigned threads = 0;  // 0 selects the hardware concurrency
  MultiplierOptions multipliers;
  LinearizeOptions linearize;
};

struct SweepRecord {
  std::vector<Index> horizons;
  std::vector<MultiplierSet> multipliers;  // normalized, one per horizon
  std::vector<HorizonGap> gaps;
  std::vector<ConvergenceSeries> per_t;  // t = 1..t_max
  Index t_max = 0;
  double limit_lambda0 = 0.0;
  std::vector<Vector> limit_p;  // p_1..p_{t_max} at the largest horizon
  /// lambda0 + ||(q1, q2)|_Sigma|| at the largest horizon.
  double nontriviality_margin = 0.0;
  /// lambda0 + ||p_1|| + ||p_2|| at the largest horizon.
  double costate_margin = 0.0;
  Matrix sigma;
};

/// Normalized multipliers for h = 2..h_max. Horizons are computed
/// concurrently and stored in increasing order; failures become gaps.
SweepRecord sweep(const ControlSystem& system, const Process& reference,
                  const SweepOptions& options = {});

struct MultiplierBoundReport {
  bool applicable = false;
  std::string note;
  /// For each sample pair, sup over h of (p_1(z0) + p_2(z1)) / lambda0.
  std::vector<double> sup_ratio;
  /// ratios[i][k] at horizons[k].
  std::vector<std::vector<double>> ratios;
  bool bounded = false;
};

MultiplierBoundReport check_multiplier_bounds(const SweepRecord& record,
                             const std::vector<std::pair<Vector, Vector>>& samples);

struct DecompositionWitness {
  Vector v;
  Vector zeta0;
  Vector zeta1;
  Vector z0;  // B_0 zeta0
  Vector z1;  // B_1 zeta1
  double residual = 0.0;
  bool feasible = false;
};

/// Finds zeta_i in T_i with v = A_1 B_0 zeta0 + B_1 zeta1 by least squares
/// over cone generators with nonnegative ray weights. feasible is false when
/// the residual exceeds `tol`.
DecompositionWitness decompose_v(const Vector& v, const LinearizedStage& stage0,
                                 const LinearizedStage& stage1, const PolyhedralSet& cone0,
                                 const PolyhedralSet& cone1, double tol = 1e-8);

struct SubspaceNormReport {
  std::vector<double> restricted_norms;  // per horizon
  std::vector<double> identity_errors;   // |lambda0 + norm - 1|
  bool identity_holds = false;
  /// The pair (lambda0, norm) stays away from (0, 0) at every horizon.
  bool nonvanishing = false;
};

SubspaceNormReport subspace_norm_convergence(const SweepRecord& record, const Matrix& sigma,
                                             double tol = 1e-10);

}  // namespace pontryagin
