#include "pontryagin/model.hpp"

#include "pontryagin/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pontryagin {
namespace {

std::string stage_label(Index t) { return "stage " + std::to_string(t); }

void require_dim(const Vector& v, Index dim, const std::string& what) {
  if (v.size() != dim) {
    throw DimensionError(what + " has dimension " + std::to_string(v.size()) +
                         ", expected " + std::to_string(dim));
  }
}

}  // namespace

StateDomain StateDomain::all_space(Index dim) {
  if (dim <= 0) throw DimensionError("StateDomain: dimension must be positive");
  StateDomain d;
  d.dim_ = dim;
  return d;
}

StateDomain StateDomain::open_box(Vector lower, Vector upper) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw DimensionError("StateDomain::open_box: bound sizes differ or are empty");
  }
  for (Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i))) {
      throw NonFiniteError("StateDomain::open_box: NaN bound");
    }
    if (!(lower(i) < upper(i))) {
      throw DomainError("StateDomain::open_box: empty interval at coordinate " +
                        std::to_string(i));
    }
  }
  StateDomain d;
  d.dim_ = lower.size();
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  return d;
}

bool operator==(const StateDomain& a, const StateDomain& b) {
  return a.dim_ == b.dim_ && linalg::identical(a.lower_, b.lower_) &&
         linalg::identical(a.upper_, b.upper_);
}

bool StateDomain::contains(const Vector& x) const {
  if (x.size() != dim_) return false;
  if (!x.allFinite()) return false;
  if (is_all_space()) return true;
  return ((x - lower_).array() > 0.0).all() && ((upper_ - x).array() > 0.0).all();
}

ControlSystem::ControlSystem(ControlSystemParts parts) : parts_(std::move(parts)) {
  if (parts_.state_dim <= 0 || parts_.control_dim <= 0) {
    throw DimensionError("ControlSystem: dimensions must be positive");
  }
  if (!parts_.dynamics || !parts_.reward) {
    throw Error("ControlSystem: dynamics and reward are required");
  }
  if (!parts_.state_domain) {
    const Index n = parts_.state_dim;
    parts_.state_domain = [n](Index) { return StateDomain::all_space(n); };
  }
  if (!parts_.control_set) {
    const Index m = parts_.control_dim;
    parts_.control_set = [m](Index) { return PolyhedralSet::all_space(m); };
  }
}

Vector ControlSystem::step(Index t, const Vector& x, const Vector& u) const {
  require_dim(x, state_dim(), "state");
  require_dim(u, control_dim(), "control");
  Vector out = parts_.dynamics(t, x, u);
  require_dim(out, state_dim(), "f_t output at " + stage_label(t));
  linalg::require_finite(out, "f_t output at " + stage_label(t));
  return out;
}

double ControlSystem::reward(Index t, const Vector& x, const Vector& u) const {
  require_dim(x, state_dim(), "state");
  require_dim(u, control_dim(), "control");
  const double v = parts_.reward(t, x, u);
  if (!std::isfinite(v)) throw NonFiniteError("phi_t is not finite at " + stage_label(t));
  return v;
}

StateDomain ControlSystem::state_domain(Index t) const {
  StateDomain d = parts_.state_domain(t);
  if (d.dim() != state_dim()) throw DimensionError("state domain dimension mismatch");
  return d;
}

PolyhedralSet ControlSystem::control_set(Index t) const {
  PolyhedralSet s = parts_.control_set(t);
  if (s.dim() != control_dim()) throw DimensionError("control set dimension mismatch");
  return s;
}

StageDerivatives ControlSystem::derivatives(Index t, const Vector& x, const Vector& u) const {
  if (!has_derivatives()) throw Error("ControlSystem: no analytic derivatives supplied");
  return parts_.derivatives(t, x, u);
}

Process::Process(Vector initial_state, std::vector<Vector> states, std::vector<Vector> controls)
    : states_(std::move(states)), controls_(std::move(controls)) {
  if (states_.size() != controls_.size() + 1) {
    throw DimensionError("Process: expected one more state than controls");
  }
  if (!linalg::identical(states_.front(), initial_state)) {
    throw InfeasibleReferenceError("Process: states[0] differs from the initial state");
  }
  for (const auto& x : states_) {
    if (x.size() != initial_state.size()) throw DimensionError("Process: ragged states");
  }
  for (const auto& u : controls_) {
    if (controls_.front().size() != u.size()) throw DimensionError("Process: ragged controls");
  }
}

bool operator==(const Process& a, const Process& b) {
  auto same = [](const std::vector<Vector>& x, const std::vector<Vector>& y) {
    return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                      [](const Vector& l, const Vector& r) { return linalg::identical(l, r); });
  };
  return same(a.states_, b.states_) && same(a.controls_, b.controls_);
}

const Vector& Process::state(Index t) const {
  if (t < 0 || t >= static_cast<Index>(states_.size())) {
    throw DimensionError("Process: state index " + std::to_string(t) + " not materialized");
  }
  return states_[static_cast<std::size_t>(t)];
}

const Vector& Process::control(Index t) const {
  if (t < 0 || t >= length()) {
    throw DimensionError("Process: control index " + std::to_string(t) + " not materialized");
  }
  return controls_[static_cast<std::size_t>(t)];
}

Process Process::prefix(Index stages) const {
  if (stages < 0 || stages > length()) {
    throw DimensionError("Process::prefix: only " + std::to_string(length()) +
                         " stages materialized");
  }
  return Process(initial_state(),
                 std::vector<Vector>(states_.begin(), states_.begin() + stages + 1),
                 std::vector<Vector>(controls_.begin(), controls_.begin() + stages));
}

Process simulate(const ControlSystem& system, const Vector& sigma,
                 const std::vector<Vector>& controls, Index horizon, double tol) {
  if (horizon < 0) throw DimensionError("simulate: negative horizon");
  if (static_cast<Index>(controls.size()) < horizon + 1) {
    throw DimensionError("simulate: need " + std::to_string(horizon + 1) + " controls, got " +
                         std::to_string(controls.size()));
  }
  require_dim(sigma, system.state_dim(), "initial state");
  std::vector<Vector> xs{sigma};
  std::vector<Vector> us;
  for (Index t = 0; t <= horizon; ++t) {
    const Vector& x = xs.back();
    if (!system.state_domain(t).contains(x)) {
      throw DomainError("simulate: x_" + std::to_string(t) + " leaves X_t");
    }
    const Vector& u = controls[static_cast<std::size_t>(t)];
    require_dim(u, system.control_dim(), "control");
    const double viol = system.control_set(t).violation(u);
    if (viol > tol) {
      throw MembershipError("simulate: u_" + std::to_string(t) + " violates U_t by " +
                            std::to_string(viol));
    }
    us.push_back(u);
    xs.push_back(system.step(t, x, u));
  }
  if (!system.state_domain(horizon + 1).contains(xs.back())) {
    throw DomainError("simulate: x_" + std::to_string(horizon + 1) + " leaves X_t");
  }
  return Process(sigma, std::move(xs), std::move(us));
}

double dynamics_residual(const ControlSystem& system, const Process& process, Index stages) {
  if (stages > process.length()) throw DimensionError("dynamics_residual: too many stages");
  double worst = 0.0;
  for (Index t = 0; t < stages; ++t) {
    const Vector next = system.step(t, process.state(t), process.control(t));
    worst = std::max(worst, (process.state(t + 1) - next).norm());
  }
  return worst;
}

SeriesReport evaluate_objective(const ControlSystem& system, const Process& process,
                                Index horizon_cap, const SeriesOptions& options) {
  if (horizon_cap < 0 || horizon_cap >= process.length()) {
    throw DimensionError("evaluate_objective: process not materialized to the cap");
  }
  SeriesReport out;
  double s = 0.0;
  for (Index t = 0; t <= horizon_cap; ++t) {
    s += system.reward(t, process.state(t), process.control(t));
    out.partial_sums.push_back(s);
  }
  const auto count = static_cast<Index>(out.partial_sums.size());
  if (count >= options.window) {
    const auto tail_begin = out.partial_sums.end() - options.window;
    const auto [lo, hi] = std::minmax_element(tail_begin, out.partial_sums.end());
    out.tail_variation = *hi - *lo;
    out.convergent = out.tail_variation < options.tolerance;
  }
  return out;
}

ComparisonReport compare_processes(const ControlSystem& system, const Process& candidate,
                                   const Process& challenger, Index horizon_cap,
                                   const ComparisonOptions& options) {
  if (!linalg::identical(candidate.initial_state(), challenger.initial_state())) {
    throw InfeasibleReferenceError("compare_processes: initial states differ");
  }
  if (horizon_cap < 0 || horizon_cap >= candidate.length() ||
      horizon_cap >= challenger.length()) {
    throw DimensionError("compare_processes: processes not materialized to the cap");
  }
  ComparisonReport out;
  double delta = 0.0;
  for (Index t = 0; t <= horizon_cap; ++t) {
    delta += system.reward(t, candidate.state(t), candidate.control(t)) -
             system.reward(t, challenger.state(t), challenger.control(t));
    out.deltas.push_back(delta);
  }
  const auto count = static_cast<Index>(out.deltas.size());
  const Index tail = std::max<Index>(
      1, static_cast<Index>(std::ceil(options.tail_fraction * static_cast<double>(count))));
  const auto [lo, hi] = std::minmax_element(out.deltas.end() - tail, out.deltas.end());
  out.limsup_estimate = *hi;
  out.liminf_estimate = *lo;
  out.dominates_limsup = out.limsup_estimate >= -options.tolerance;
  out.dominates_liminf = out.liminf_estimate >= -options.tolerance;
  return out;
}

LinearizedStage linearize(const ControlSystem& system, const Process& process, Index t,
                          const LinearizeOptions& options) {
  return linearize_at(system, t, process.state(t), process.control(t), options);
}

LinearizedStage linearize_at(const ControlSystem& system, Index t, const Vector& x,
                             const Vector& u, const LinearizeOptions& options) {
  const Index n = system.state_dim();
  const Index m = system.control_dim();
  require_dim(x, n, "state");
  require_dim(u, m, "control");
  if (!system.state_domain(t).contains(x)) {
    throw DomainError("linearize: x_" + std::to_string(t) + " is not interior to X_t");
  }

  DerivativeMethod method = options.method;
  if (method == DerivativeMethod::automatic) {
    method = system.has_derivatives() ? DerivativeMethod::user_jacobian
                                      : DerivativeMethod::central_difference;
  }

  LinearizedStage out;
  out.t = t;
  if (method == DerivativeMethod::user_jacobian) {
    StageDerivatives d = system.derivatives(t, x, u);
    if (d.A.rows() != n || d.A.cols() != n || d.B.rows() != n || d.B.cols() != m ||
        d.c.size() != n || d.d.size() != m) {
      throw DimensionError("linearize: supplied derivatives have wrong shape");
    }
    out.A = std::move(d.A);
    out.B = std::move(d.B);
    out.c = std::move(d.c);
    out.d = std::move(d.d);
  } else {
    const double h = options.step;
    if (!(h > 0.0)) throw Error("linearize: finite-difference step must be positive");
    out.A.resize(n, n);
    out.B.resize(n, m);
    out.c.resize(n);
    out.d.resize(m);
    for (Index j = 0; j < n; ++j) {
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      out.A.col(j) = (system.step(t, xp, u) - system.step(t, xm, u)) / (2.0 * h);
      out.c(j) = (system.reward(t, xp, u) - system.reward(t, xm, u)) / (2.0 * h);
    }
    for (Index j = 0; j < m; ++j) {
      Vector up = u, um = u;
      up(j) += h;
      um(j) -= h;
      out.B.col(j) = (system.step(t, x, up) - system.step(t, x, um)) / (2.0 * h);
      out.d(j) = (system.reward(t, x, up) - system.reward(t, x, um)) / (2.0 * h);
    }
  }
  linalg::require_finite(out.A, "D1 f_t");
  linalg::require_finite(out.B, "D2 f_t");
  linalg::require_finite(out.c, "D1 phi_t");
  linalg::require_finite(out.d, "D2 phi_t");
  return out;
}

}  // namespace pontryagin
