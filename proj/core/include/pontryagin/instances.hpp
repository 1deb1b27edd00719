#pragma once

#include "pontryagin/model.hpp"
#include "pontryagin/polyhedral_set.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pontryagin {

enum class DynamicsFamily { linear, growth };
enum class RewardFamily { quadratic, log };
enum class OracleKind { none, riccati, brute_force_qp, brute_force_nlp };

std::string to_string(DynamicsFamily f);
std::string to_string(RewardFamily f);
std::string to_string(OracleKind k);

struct StageOverride {
  Index t = 0;
  Matrix A;  // empty: keep the stationary A
  Matrix B;  // empty: keep the stationary B
};

/// linear: x' = A_t x + B_t u + W (u .* u)   (W optional, n x m)
/// growth: x' = x^alpha - u                  (scalar)
struct DynamicsModel {
  DynamicsFamily family = DynamicsFamily::linear;
  Matrix A;
  Matrix B;
  Matrix control_square;
  std::vector<StageOverride> overrides;
  double alpha = 0.3;

  const Matrix& A_at(Index t) const;
  const Matrix& B_at(Index t) const;
};

/// quadratic: phi_t = beta^t (-1/2 x'Qx - 1/2 u'Ru + q'x + r'u)
/// log:       phi_t = beta^t ln(u[control_index])
struct RewardModel {
  RewardFamily family = RewardFamily::quadratic;
  Matrix Q;
  Matrix R;
  Vector q;
  Vector r;
  double discount = 1.0;
  Index control_index = 0;
};

/// Stationary problem data in the shape of the problem-file format.
struct ProblemDefinition {
  std::string name;
  Index state_dim = 0;
  Index control_dim = 0;
  DynamicsModel dynamics;
  RewardModel reward;
  StateDomain state_domain = StateDomain::all_space(1);
  PolyhedralSet control_set = PolyhedralSet::all_space(1);
  Vector initial_state;
  std::vector<Vector> reference_states;
  std::vector<Vector> reference_controls;
  OracleKind oracle = OracleKind::none;
  /// Expected verdict per check family (H1..H6, closed_image..initial_onto).
  std::map<std::string, std::string> hypothesis_profile;
  std::string notes;
};

bool identical(const ProblemDefinition& a, const ProblemDefinition& b);

struct InstanceBundle {
  ProblemDefinition definition;
  ControlSystem system;
  Process reference;
};

/// Stationary system with analytic derivatives. Throws DimensionError on
/// inconsistent data.
ControlSystem build_system(const ProblemDefinition& def);

/// Validates the reference against the dynamics and control set.
InstanceBundle make_bundle(ProblemDefinition def);

std::vector<std::string> builtin_names();

/// Throws UnknownInstanceError for names outside builtin_names().
InstanceBundle builtin(const std::string& name);

std::string to_yaml(const ProblemDefinition& def);
/// Throws SchemaError with the offending field and line.
ProblemDefinition parse_yaml(const std::string& text);

void save(const InstanceBundle& bundle, const std::filesystem::path& path);
InstanceBundle load(const std::filesystem::path& path);

/// Builtin name or path to a problem file.
InstanceBundle resolve_instance(const std::string& name_or_path);

/// Costates p_1..p_{h+1} of the pinned-endpoint LQ problem on the bundle's
/// reference, from a backward Riccati sweep. Uses the maximization sign
/// convention with lambda0 = 1 (p_t is minus the minimization costate).
/// Throws Error for non-LQ instances.
std::vector<Vector> riccati_oracle(const InstanceBundle& bundle, Index h);

/// Stabilizing solution of the discrete algebraic Riccati equation by fixed
/// point iteration.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// Minimizes 1/2 u'Hu + f'u over lower <= u <= upper by a primal-dual active
/// set iteration; throws Error if KKT conditions are not met on exit.
Vector solve_box_qp(const Matrix& H, const Vector& f, const Vector& lower, const Vector& upper);

}  // namespace pontryagin
