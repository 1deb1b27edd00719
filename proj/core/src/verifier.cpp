#include "pontryagin/verifier.hpp"

#include "pontryagin/limit_analysis.hpp"
#include "pontryagin/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pontryagin {

SetMaximum max_over_control_set(const Vector& gradient, const PolyhedralSet& set,
                                const Vector& u_hat, double recession_tol) {
  const Index m = set.dim();
  if (gradient.size() != m || u_hat.size() != m) {
    throw DimensionError("max_over_control_set: dimension mismatch");
  }
  if (!set.contains(u_hat)) throw MembershipError("max_over_control_set: u_hat not in the set");

  SetMaximum out;
  switch (set.kind()) {
    case SetKind::all_space: {
      if (gradient.cwiseAbs().maxCoeff() > recession_tol) {
        out.bounded = false;
        out.value = kInfinity;
        out.ray = gradient.normalized();
      } else {
        out.argmax = u_hat;
        out.value = 0.0;
      }
      return out;
    }
    case SetKind::box: {
      Vector u = u_hat;
      Vector ray = Vector::Zero(m);
      for (Index i = 0; i < m; ++i) {
        const double g = gradient(i);
        if (g > 0.0) {
          if (std::isfinite(set.upper()(i))) u(i) = set.upper()(i);
          else if (g > recession_tol) ray(i) = 1.0;
        } else if (g < 0.0) {
          if (std::isfinite(set.lower()(i))) u(i) = set.lower()(i);
          else if (g < -recession_tol) ray(i) = -1.0;
        }
      }
      if (ray.squaredNorm() > 0.0) {
        out.bounded = false;
        out.value = kInfinity;
        out.ray = ray.normalized();
        return out;
      }
      out.argmax = u;
      out.value = gradient.dot(u - u_hat);
      return out;
    }
    case SetKind::half_spaces:
      break;
  }

  // Moreau split of g against the recession cone {d : G d <= 0}: the residual
  // of the projection onto its polar cone(G^T) lies in the recession cone.
  const Matrix& g_rows = set.normals();
  const Vector lam = lp::nnls(g_rows.transpose(), gradient);
  const Vector polar_part = g_rows.transpose() * lam;
  const Vector recession_part = gradient - polar_part;
  if (recession_part.norm() > recession_tol) {
    out.bounded = false;
    out.value = kInfinity;
    out.ray = recession_part.normalized();
    return out;
  }
  lp::LinearProgram prog;
  prog.objective = polar_part;
  prog.ub_matrix = g_rows;
  prog.ub_rhs = set.offsets();
  prog.free_variable.assign(static_cast<std::size_t>(m), true);
  const auto sol = lp::solve(prog);
  if (sol.status == lp::Status::unbounded) {
    out.bounded = false;
    out.value = kInfinity;
    out.ray = sol.ray.normalized();
    return out;
  }
  if (sol.status != lp::Status::optimal) throw Error("max_over_control_set: LP failed");
  out.argmax = sol.x;
  out.value = std::max(gradient.dot(sol.x - u_hat), 0.0);
  return out;
}

double max_over_vertices(const Vector& gradient, const PolyhedralSet& set, const Vector& u_hat) {
  double best = -kInfinity;
  for (const auto& v : vertices(set)) best = std::max(best, gradient.dot(v - u_hat));
  return best;
}

VerificationReport verify(const ControlSystem& system, const Process& process, double lambda0,
                          const std::vector<Vector>& p, Index t_check,
                          const VerifyOptions& options) {
  if (t_check < 1) throw DimensionError("verify: T_check must be at least 1");
  if (static_cast<Index>(p.size()) < t_check + 1) {
    throw DimensionError("verify: need costates p_1..p_{T+1}");
  }
  if (process.length() < t_check + 1) {
    throw DimensionError("verify: process must be materialized to stage T_check");
  }
  const Index n = system.state_dim();
  for (const auto& pt : p) {
    if (pt.size() != n) throw DimensionError("verify: costate dimension mismatch");
  }
  auto costate = [&](Index t) -> const Vector& { return p[static_cast<std::size_t>(t - 1)]; };

  std::vector<LinearizedStage> stages;
  for (Index t = 0; t <= t_check; ++t) stages.push_back(linearize(system, process, t, options.linearize));

  VerificationReport rep;
  rep.t_check = t_check;
  rep.note = "conditions checked to finite depth T = " + std::to_string(t_check) +
             "; later stages are not examined";

  // Scale so that lambda0 + ||(q1, q2)|_Sigma|| = 1 where possible.
  const PolyhedralSet set0 = system.control_set(0);
  const PolyhedralSet set1 = system.control_set(1);
  const PolyhedralSet cone0 = tangent_cone(set0, process.control(0));
  const PolyhedralSet cone1 = tangent_cone(set1, process.control(1));
  MultiplierSet ms;
  ms.lambda0 = lambda0;
  ms.q1 = stages[0].B.transpose() * costate(1);
  ms.q2 = stages[1].B.transpose() * costate(2);
  const double theta = lambda0 + restricted_norm(ms, sigma_basis(cone0, cone1));
  const double fallback = std::abs(lambda0) + costate(1).norm() + costate(2).norm();
  rep.scale = theta > 1e-12 ? theta : (fallback > 1e-12 ? fallback : 1.0);
  const double l0 = lambda0 / rep.scale;

  rep.cond1_margin = std::sqrt(lambda0 * lambda0 + costate(1).squaredNorm() + costate(2).squaredNorm());
  rep.cond1_nontrivial = rep.cond1_margin > options.nontrivial_floor;
  rep.cond2_sign = l0 >= -options.sign_tol;

  rep.cond3_pass = true;
  for (Index t = 1; t <= t_check; ++t) {
    const auto& s = stages[static_cast<std::size_t>(t)];
    const double r =
        (costate(t) - s.A.transpose() * costate(t + 1) - lambda0 * s.c).norm() / rep.scale;
    rep.cond3_residuals.push_back(r);
    rep.cond3_pass = rep.cond3_pass && r <= options.tol_adjoint;
  }

  rep.cond4_pass = true;
  for (Index t = 0; t <= t_check; ++t) {
    const auto& s = stages[static_cast<std::size_t>(t)];
    const Vector g = (lambda0 * s.d + s.B.transpose() * costate(t + 1)) / rep.scale;
    const SetMaximum mx = max_over_control_set(g, system.control_set(t), process.control(t));
    rep.cond4_violations.push_back(mx.value);
    rep.cond4_rays.push_back(mx.bounded ? Vector() : mx.ray);
    rep.cond4_pass = rep.cond4_pass && mx.value <= options.tol_vi;
  }

  rep.overall = rep.cond1_nontrivial && rep.cond2_sign && rep.cond3_pass && rep.cond4_pass;
  if (!rep.cond1_nontrivial) rep.first_failure = "cond1";
  else if (!rep.cond2_sign) rep.first_failure = "cond2";
  else if (!rep.cond3_pass) rep.first_failure = "cond3";
  else if (!rep.cond4_pass) rep.first_failure = "cond4";
  return rep;
}

}  // namespace pontryagin
