#pragma once

#include "pontryagin/polyhedral_set.hpp"
#include "pontryagin/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pontryagin {

/// Open state domain X_t: either all of R^n or an open box (lower, upper)
/// whose bounds may be infinite.
class StateDomain {
 public:
  static StateDomain all_space(Index dim);
  static StateDomain open_box(Vector lower, Vector upper);

  Index dim() const { return dim_; }
  bool is_all_space() const { return lower_.size() == 0; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  /// Strict interior membership.
  bool contains(const Vector& x) const;

  friend bool operator==(const StateDomain& a, const StateDomain& b);

 private:
  StateDomain() = default;
  Index dim_ = 0;
  Vector lower_;
  Vector upper_;
};

/// First-order data of one stage: D1f, D2f, D1phi, D2phi (gradients stored as
/// column vectors).
struct StageDerivatives {
  Matrix A;
  Matrix B;
  Vector c;
  Vector d;
};

using DynamicsFn = std::function<Vector(Index t, const Vector& x, const Vector& u)>;
using RewardFn = std::function<double(Index t, const Vector& x, const Vector& u)>;
using DerivativeFn =
    std::function<StageDerivatives(Index t, const Vector& x, const Vector& u)>;
using StateDomainFn = std::function<StateDomain(Index t)>;
using ControlSetFn = std::function<PolyhedralSet(Index t)>;

struct ControlSystemParts {
  Index state_dim = 0;
  Index control_dim = 0;
  DynamicsFn dynamics;
  RewardFn reward;
  StateDomainFn state_domain;
  ControlSetFn control_set;
  /// Optional analytic derivatives; finite differences are used otherwise.
  DerivativeFn derivatives;
};

/// The family (f_t, phi_t, X_t, U_t), defined lazily for every t >= 0.
/// Immutable after construction and safe to share between threads as long as
/// the supplied closures are.
class ControlSystem {
 public:
  explicit ControlSystem(ControlSystemParts parts);

  Index state_dim() const { return parts_.state_dim; }
  Index control_dim() const { return parts_.control_dim; }

  /// f_t(x, u); throws DimensionError / NonFiniteError on bad output.
  Vector step(Index t, const Vector& x, const Vector& u) const;
  double reward(Index t, const Vector& x, const Vector& u) const;
  StateDomain state_domain(Index t) const;
  PolyhedralSet control_set(Index t) const;

  bool has_derivatives() const { return static_cast<bool>(parts_.derivatives); }
  StageDerivatives derivatives(Index t, const Vector& x, const Vector& u) const;

 private:
  ControlSystemParts parts_;
};

/// States x_0..x_N and controls u_0..u_{N-1}; N = length() stages.
class Process {
 public:
  Process(Vector initial_state, std::vector<Vector> states, std::vector<Vector> controls);

  const Vector& initial_state() const { return states_.front(); }
  const std::vector<Vector>& states() const { return states_; }
  const std::vector<Vector>& controls() const { return controls_; }
  const Vector& state(Index t) const;
  const Vector& control(Index t) const;
  Index length() const { return static_cast<Index>(controls_.size()); }

  /// The first `stages` stages (controls 0..stages-1, states 0..stages).
  Process prefix(Index stages) const;

  friend bool operator==(const Process& a, const Process& b);

 private:
  std::vector<Vector> states_;
  std::vector<Vector> controls_;
};

/// Runs x_{t+1} = f_t(x_t, u_t) for t = 0..horizon. Controls are checked
/// against U_t and states against X_t.
Process simulate(const ControlSystem& system, const Vector& sigma,
                 const std::vector<Vector>& controls, Index horizon,
                 double tol = kMembershipTol);

/// Largest ||x_{t+1} - f_t(x_t, u_t)|| over t < stages.
double dynamics_residual(const ControlSystem& system, const Process& process, Index stages);

struct SeriesOptions {
  Index window = 10;
  double tolerance = 1e-9;
};

struct SeriesReport {
  std::vector<double> partial_sums;  // S_0..S_cap
  double tail_variation = kInfinity;
  bool convergent = false;
};

SeriesReport evaluate_objective(const ControlSystem& system, const Process& process,
                                Index horizon_cap, const SeriesOptions& options = {});

struct ComparisonOptions {
  double tail_fraction = 0.25;
  double tolerance = 1e-9;
};

struct ComparisonReport {
  std::vector<double> deltas;  // Delta_0..Delta_cap
  double limsup_estimate = 0.0;
  double liminf_estimate = 0.0;
  /// limsup Delta_h >= -tol: the candidate is not beaten in the limsup sense.
  bool dominates_limsup = false;
  /// liminf Delta_h >= -tol.
  bool dominates_liminf = false;
};

ComparisonReport compare_processes(const ControlSystem& system, const Process& candidate,
                                   const Process& challenger, Index horizon_cap,
                                   const ComparisonOptions& options = {});

struct LinearizedStage {
  Index t = 0;
  Matrix A;  // D1 f_t
  Matrix B;  // D2 f_t
  Vector c;  // D1 phi_t
  Vector d;  // D2 phi_t
};

enum class DerivativeMethod { automatic, user_jacobian, central_difference };

struct LinearizeOptions {
  DerivativeMethod method = DerivativeMethod::automatic;
  double step = 1e-6;
};

/// Derivatives of f_t and phi_t at (x_t, u_t) of the process.
LinearizedStage linearize(const ControlSystem& system, const Process& process, Index t,
                          const LinearizeOptions& options = {});

/// Same, at an explicit point.
LinearizedStage linearize_at(const ControlSystem& system, Index t, const Vector& x,
                             const Vector& u, const LinearizeOptions& options = {});

}  // namespace pontryagin
