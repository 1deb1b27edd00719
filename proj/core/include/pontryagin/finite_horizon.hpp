#pragma once

#include "pontryagin/model.hpp"
#include "pontryagin/polyhedral_set.hpp"
#include "pontryagin/types.hpp"

#include <cstdint>
#include <vector>

namespace pontryagin {

/// Horizon-h truncation: maximize J_h = sum_{t<=h} phi_t over
/// (x_1..x_h, u_0..u_h) with x_0 = sigma and x_{h+1} pinned to the reference.
class TruncatedProblem {
 public:
  TruncatedProblem(ControlSystem system, Process reference, Index h);

  Index h() const { return h_; }
  const ControlSystem& system() const { return system_; }
  const Vector& sigma() const { return reference_.initial_state(); }
  const Vector& terminal_state() const { return reference_.state(h_ + 1); }
  /// Reference restricted to stages 0..h (states 0..h+1).
  const Process& reference() const { return reference_; }

  /// Decision vector layout: (x_1, .., x_h, u_0, .., u_h).
  Index decision_size() const;
  Vector reference_decision() const;
  Process process_from_decision(const Vector& decision) const;

 private:
  ControlSystem system_;
  Process reference_;
  Index h_;
};

/// Fails with InfeasibleReferenceError if the reference violates the dynamics
/// (relative tolerance `tol`) or is too short.
TruncatedProblem truncate(const ControlSystem& system, const Process& reference, Index h,
                          double tol = 1e-9);

/// J_h at a decision vector.
double objective(const TruncatedProblem& problem, const Vector& decision);

/// g^h: block t is -x_{t+1} + f_t(x_t, u_t), t = 0..h.
Vector constraint_map(const TruncatedProblem& problem, const Vector& decision);

struct ConstraintLinearization {
  Index h = 0;
  Index state_dim = 0;
  Index control_dim = 0;
  std::vector<LinearizedStage> blocks;  // stages 0..h
  /// ((h+1) n) x (h n + (h+1) m): state columns y_1..y_h, then v_0..v_h.
  Matrix assembled;
};

/// Builds Dg^h from per-stage linearizations (blocks[t].t must equal t).
ConstraintLinearization assemble(std::vector<LinearizedStage> blocks);

ConstraintLinearization assemble_constraints(const TruncatedProblem& problem,
                                             const LinearizeOptions& options = {});

struct SurjectivityReport {
  /// Always true in finite dimension; kept for the report.
  bool closed_range = true;
  bool surjective = false;
  Index rank = 0;
  Index rows = 0;
  double margin = 0.0;  // smallest retained singular value
};

SurjectivityReport check_closedness_surjectivity(const ConstraintLinearization& lin,
                                                 double rank_tolerance = kDefaultRankTol);

struct BoundSample {
  Vector z;
  double ratio = 0.0;     // max block norm of the preimage over max_t ||z_t||
  double residual = 0.0;  // ||Dg^h (y, v) - z||
  bool ok = false;
};

struct BoundCertificate {
  Index h = 0;
  /// a_0..a_h. The terminal pair of stages is solved jointly, so a_{h-1}
  /// equals a_h.
  std::vector<double> constants;
  std::vector<double> forward_b;  // b_t = 1/sigma_min(L_t), t = 0..h-2
  double c = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::vector<BoundSample> samples;
  bool all_passed = false;

  double a_h() const { return constants.back(); }
};

struct BoundOptions {
  Index samples = 50;
  std::uint64_t seed = 42;
  double residual_tol = 1e-8;
  double rank_tolerance = kDefaultRankTol;
};

/// Preimage of z under Dg^h built stage by stage (forward least-norm solves
/// through L_t = [-I, B_t], then the joint terminal solve through
/// [A_h B_{h-1}, B_h]). Returns (y_1..y_h, v_0..v_h) in assembled layout.
/// Throws HypothesisError when the terminal right-hand side leaves the range.
Vector constructive_preimage(const ConstraintLinearization& lin, const Vector& z,
                             double rank_tolerance = kDefaultRankTol);

/// Constants a_0..a_h with ||preimage|| <= a_h max_t ||z_t|| (block max
/// norm), validated on random z in the range of Dg^h. Requires the
/// range-sum condition at every stage 1..h; throws HypothesisError otherwise.
BoundCertificate preimage_bound(const ConstraintLinearization& lin, const BoundOptions& options = {});

struct MultiplierSet {
  Index h = 0;
  double lambda0 = 0.0;
  std::vector<Vector> p;  // p_1..p_{h+1}
  Vector q1;              // B_0^T p_1
  Vector q2;              // B_1^T p_2
  bool normalized = false;

  /// p_t for t in 1..h+1.
  const Vector& costate(Index t) const;
};

enum class MultiplierMode { normal_first, abnormal_only };

struct MultiplierOptions {
  MultiplierMode mode = MultiplierMode::normal_first;
  double vi_tolerance = 1e-7;
  double rank_tolerance = kDefaultRankTol;
  double membership_tolerance = kMembershipTol;
};

/// Solves the adjoint recursion and the polyhedral variational inequality for
/// (lambda0, p_1..p_{h+1}). The normal branch (lambda0 = 1) is tried first;
/// the abnormal branch searches a nonzero p_{h+1} with lambda0 = 0.
/// Throws NoMultiplierError if neither branch satisfies the tolerances.
MultiplierSet compute_multipliers(const TruncatedProblem& problem,
                                  const ConstraintLinearization& lin,
                                  const MultiplierOptions& options = {});

/// Cones T_{U_t}(u_t) of the reference at stages 0..h.
std::vector<PolyhedralSet> reference_cones(const TruncatedProblem& problem,
                                           double tol = kMembershipTol);

/// Generators of B_t(T): columns of B_t times the cone's generating set.
Matrix stage_image_generators(const LinearizedStage& stage, const PolyhedralSet& cone);

struct NontrivialityReport {
  double lambda0 = 0.0;
  double p1_restricted = 0.0;  // ||p_1|| on span(Z_0)
  double p2_restricted = 0.0;  // ||p_2|| on span(Z_1)
  double margin = 0.0;
  bool nontrivial = false;
};

NontrivialityReport check_nontriviality(const MultiplierSet& ms, const Matrix& z0_generators,
                                        const Matrix& z1_generators, double floor = 1e-12);

/// Adjoint residuals ||p_t - A_t^T p_{t+1} - lambda0 c_t||, t = 1..h.
std::vector<double> adjoint_residuals(const MultiplierSet& ms,
                                      const std::vector<LinearizedStage>& blocks);

/// Largest positive part of the variational inequality on cone generators,
/// per stage 0..h.
std::vector<double> vi_violations(const MultiplierSet& ms,
                                  const std::vector<LinearizedStage>& blocks,
                                  const std::vector<PolyhedralSet>& cones);

}  // namespace pontryagin
