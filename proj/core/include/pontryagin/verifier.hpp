#pragma once

#include "pontryagin/model.hpp"
#include "pontryagin/polyhedral_set.hpp"

#include <string>
#include <vector>

namespace pontryagin {

struct SetMaximum {
  double value = 0.0;     // max over the set of <g, u - u_hat>; +inf if unbounded
  bool bounded = true;
  Vector argmax;          // maximizer when bounded
  Vector ray;             // improving recession direction when unbounded
};

/// Exact maximum of <gradient, u - u_hat> over a polyhedral set. Gradient
/// components below `recession_tol` in magnitude are treated as zero along
/// recession directions.
SetMaximum max_over_control_set(const Vector& gradient, const PolyhedralSet& set,
                                const Vector& u_hat, double recession_tol = 1e-10);

/// Same maximum by enumerating the vertices of a bounded set.
double max_over_vertices(const Vector& gradient, const PolyhedralSet& set, const Vector& u_hat);

struct VerifyOptions {
  double tol_adjoint = 1e-8;
  double tol_vi = 1e-8;
  double sign_tol = 1e-12;
  double nontrivial_floor = 1e-12;
  LinearizeOptions linearize;
};

struct VerificationReport {
  Index t_check = 0;
  /// Positive factor the raw multipliers were divided by before judging.
  double scale = 1.0;
  bool cond1_nontrivial = false;
  double cond1_margin = 0.0;  // ||(lambda0, p_1, p_2)||, raw
  bool cond2_sign = false;
  std::vector<double> cond3_residuals;   // t = 1..T, scaled
  bool cond3_pass = false;
  std::vector<double> cond4_violations;  // t = 0..T, scaled; +inf if unbounded
  std::vector<Vector> cond4_rays;        // empty vector unless unbounded
  bool cond4_pass = false;
  bool overall = false;
  std::string first_failure;  // "" on pass
  std::string note;
};

/// Checks the four first-order conditions of the maximum principle at
/// depth T: nontriviality, lambda0 >= 0, adjoint recursion for t = 1..T and
/// the variational inequality for t = 0..T. p holds p_1..p_{T+1}.
/// Residuals are judged after normalizing (lambda0, p) so verdicts are scale
/// free.
VerificationReport verify(const ControlSystem& system, const Process& process, double lambda0,
                          const std::vector<Vector>& p, Index t_check,
                          const VerifyOptions& options = {});

}  // namespace pontryagin
