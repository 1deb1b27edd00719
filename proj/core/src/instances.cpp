#include "pontryagin/instances.hpp"

#include "pontryagin/linalg.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pontryagin {
namespace {

constexpr Index kReferenceStages = 64;

// ---------------------------------------------------------------------------
// Builtin fixtures

Matrix lq_A() {
  Matrix a(2, 2);
  a << 1.02, 0.25, -0.1, 0.97;
  return a;
}

std::map<std::string, std::string> profile_all_pass() {
  return {{"H1", "automatic"}, {"H2", "pass"},      {"H3", "pass"},   {"H4", "pass"},
          {"H5", "pass"},      {"H6", "automatic"}, {"closed_image", "automatic"},
          {"range_sum", "pass"},    {"stage_onto", "pass"},    {"initial_onto", "pass"}};
}

void materialize(ProblemDefinition& def, const std::function<Vector(Index, const Vector&)>& policy) {
  const ControlSystem sys = build_system(def);
  def.reference_states = {def.initial_state};
  def.reference_controls.clear();
  for (Index t = 0; t < kReferenceStages; ++t) {
    const Vector& x = def.reference_states.back();
    Vector u = policy(t, x);
    def.reference_states.push_back(sys.step(t, x, u));
    def.reference_controls.push_back(std::move(u));
  }
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P) {
  return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

ProblemDefinition lq_stable() {
  ProblemDefinition def;
  def.name = "lq-stable";
  def.state_dim = 2;
  def.control_dim = 1;
  def.dynamics.A = lq_A();
  def.dynamics.B = Matrix(2, 1);
  def.dynamics.B << 0.1, 0.6;
  def.reward.Q = Matrix::Identity(2, 2);
  def.reward.R = Matrix::Constant(1, 1, 4.0);
  def.state_domain = StateDomain::all_space(2);
  def.control_set = PolyhedralSet::all_space(1);
  def.initial_state = Vector(2);
  def.initial_state << 1.0, -1.0;
  def.oracle = OracleKind::riccati;
  def.hypothesis_profile = profile_all_pass();
  def.notes = "Stable LQ regulator; reference follows the stationary optimal feedback.";
  const Matrix P = solve_dare(def.dynamics.A, def.dynamics.B, def.reward.Q, def.reward.R);
  const Matrix K = lqr_gain(def.dynamics.A, def.dynamics.B, def.reward.R, P);
  materialize(def, [K](Index, const Vector& x) { return Vector(-K * x); });
  return def;
}

ProblemDefinition lq_boundary_control() {
  ProblemDefinition def;
  def.name = "lq-boundary-control";
  def.state_dim = 2;
  def.control_dim = 2;
  def.dynamics.A = lq_A();
  def.dynamics.B = Matrix(2, 2);
  def.dynamics.B << 0.5, 0.0, 0.1, 0.5;
  def.reward.Q = Matrix::Identity(2, 2);
  def.reward.R = Matrix::Identity(2, 2);
  def.state_domain = StateDomain::all_space(2);
  def.control_set = PolyhedralSet::box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  def.initial_state = Vector(2);
  def.initial_state << 3.0, -4.0;
  def.oracle = OracleKind::brute_force_qp;
  def.hypothesis_profile = profile_all_pass();
  def.notes =
      "LQ regulator with box controls; the second control saturates during the first stages.";

  // Box-constrained QP over a 40-stage window with the unconstrained
  // cost-to-go as terminal cost, then the unconstrained feedback.
  const Matrix& A = def.dynamics.A;
  const Matrix& B = def.dynamics.B;
  const Matrix& Q = def.reward.Q;
  const Matrix& R = def.reward.R;
  const Matrix P = solve_dare(A, B, Q, R);
  const Matrix K = lqr_gain(A, B, R, P);
  const Index n = 2, m = 2, N = 40;
  Matrix gamma = Matrix::Zero(N * n, N * m);  // x_{t} for t = 1..N
  Matrix phi(N * n, n);
  Matrix power = Matrix::Identity(n, n);
  for (Index t = 1; t <= N; ++t) {
    power = A * power;
    phi.middleRows((t - 1) * n, n) = power;
    Matrix carry = B;
    for (Index s = t - 1; s >= 0; --s) {
      gamma.block((t - 1) * n, s * m, n, m) = carry;
      carry = A * carry;
    }
  }
  Matrix qbar = Matrix::Zero(N * n, N * n);
  for (Index t = 1; t < N; ++t) qbar.block((t - 1) * n, (t - 1) * n, n, n) = Q;
  qbar.block((N - 1) * n, (N - 1) * n, n, n) = P;
  Matrix H = gamma.transpose() * qbar * gamma;
  for (Index t = 0; t < N; ++t) H.block(t * m, t * m, m, m) += R;
  const Vector f = gamma.transpose() * qbar * phi * def.initial_state;
  const Vector u = solve_box_qp(H, f, Vector::Constant(N * m, -1.0), Vector::Constant(N * m, 1.0));

  materialize(def, [&](Index t, const Vector& x) {
    if (t < N) return Vector(u.segment(t * m, m));
    const Vector v = -K * x;
    if (v.cwiseAbs().maxCoeff() > 1.0) throw Error("lq-boundary-control: tail feedback saturates");
    return v;
  });
  return def;
}

ProblemDefinition ramsey_growth() {
  ProblemDefinition def;
  def.name = "ramsey-growth";
  def.state_dim = 1;
  def.control_dim = 1;
  def.dynamics.family = DynamicsFamily::growth;
  def.dynamics.alpha = 0.3;
  def.reward.family = RewardFamily::log;
  def.reward.discount = 0.95;
  def.state_domain = StateDomain::open_box(Vector::Zero(1), Vector::Constant(1, kInfinity));
  def.control_set = PolyhedralSet::box(Vector::Zero(1), Vector::Constant(1, kInfinity));
  def.initial_state = Vector::Constant(1, 0.05);
  def.oracle = OracleKind::brute_force_nlp;
  def.hypothesis_profile = profile_all_pass();
  def.notes =
      "Log-utility growth with full depreciation: x' = x^alpha - c. Optimal consumption is "
      "(1 - alpha beta) x^alpha.";
  const double alpha = def.dynamics.alpha;
  const double beta = def.reward.discount;
  materialize(def, [=](Index, const Vector& x) {
    return Vector(Vector::Constant(1, (1.0 - alpha * beta) * std::pow(x(0), alpha)));
  });
  return def;
}

ProblemDefinition inert_control_abnormal() {
  ProblemDefinition def;
  def.name = "inert-control-abnormal";
  def.state_dim = 1;
  def.control_dim = 2;
  def.dynamics.A = Matrix::Identity(1, 1);
  def.dynamics.B = Matrix(1, 2);
  def.dynamics.B << 0.0, 1.0;
  def.dynamics.control_square = Matrix(1, 2);
  def.dynamics.control_square << 1.0, 0.0;
  def.reward.Q = Matrix::Zero(1, 1);
  def.reward.R = Matrix::Zero(2, 2);
  def.reward.q = Vector::Constant(1, -1.0);
  def.reward.r = Vector(2);
  def.reward.r << 1.0, 0.0;
  def.state_domain = StateDomain::all_space(1);
  Vector lo(2), hi(2);
  lo << -kInfinity, 0.0;
  hi << kInfinity, kInfinity;
  def.control_set = PolyhedralSet::box(lo, hi);
  def.initial_state = Vector::Zero(1);
  def.oracle = OracleKind::none;
  def.hypothesis_profile = profile_all_pass();
  def.hypothesis_profile["H5"] = "fail";
  def.notes =
      "x' = x + u1^2 + u2 with u2 >= 0 and the endpoint pinned at 0: only the zero process is "
      "feasible, the first control is inert to first order, and only abnormal multipliers exist.";
  materialize(def, [](Index, const Vector&) { return Vector(Vector::Zero(2)); });
  return def;
}

ProblemDefinition rank_deficient_h4_fail() {
  ProblemDefinition def;
  def.name = "rank-deficient-H4-fail";
  def.state_dim = 2;
  def.control_dim = 2;
  def.dynamics.A = lq_A();
  def.dynamics.B = Matrix::Identity(2, 2);
  StageOverride s1{1, Matrix(), Matrix::Zero(2, 2)};
  Matrix b2 = Matrix::Zero(2, 2);
  b2(0, 0) = 1.0;
  StageOverride s2{2, Matrix(), b2};
  def.dynamics.overrides = {s1, s2};
  def.reward.Q = Matrix::Identity(2, 2);
  def.reward.R = Matrix::Identity(2, 2);
  def.state_domain = StateDomain::all_space(2);
  def.control_set = PolyhedralSet::all_space(2);
  def.initial_state = Vector(2);
  def.initial_state << 1.0, -1.0;
  def.oracle = OracleKind::riccati;
  def.hypothesis_profile = profile_all_pass();
  def.hypothesis_profile["H4"] = "fail";
  def.hypothesis_profile["range_sum"] = "fail";
  def.notes = "B_1 = 0 and B_2 = diag(1, 0) so A_2 B_1 = 0 and B_2 is rank deficient.";

  const Matrix& A = def.dynamics.A;
  const Matrix& Q = def.reward.Q;
  const Matrix& R = def.reward.R;
  const Matrix P_inf = solve_dare(A, def.dynamics.B, Q, R);
  std::vector<Matrix> gains(3);
  Matrix P = P_inf;
  for (Index t = 2; t >= 0; --t) {
    const Matrix& B = def.dynamics.B_at(t);
    gains[static_cast<std::size_t>(t)] = lqr_gain(A, B, R, P);
    P = Q + A.transpose() * P * (A - B * gains[static_cast<std::size_t>(t)]);
  }
  const Matrix K_inf = lqr_gain(A, def.dynamics.B, R, P_inf);
  materialize(def, [&](Index t, const Vector& x) {
    return Vector(-(t < 3 ? gains[static_cast<std::size_t>(t)] : K_inf) * x);
  });
  return def;
}

// ---------------------------------------------------------------------------
// YAML

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : -1; }

YAML::Node require(const YAML::Node& parent, const std::string& key, const std::string& path) {
  if (!parent.IsMap()) throw SchemaError(path, line_of(parent), "expected a mapping");
  const YAML::Node node = parent[key];
  if (!node) throw SchemaError(path.empty() ? key : path + "." + key, line_of(parent), "missing field");
  return node;
}

double read_double(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw SchemaError(field, line_of(node), "expected a number");
  }
}

Index read_index(const YAML::Node& node, const std::string& field) {
  try {
    return static_cast<Index>(node.as<long long>());
  } catch (const YAML::Exception&) {
    throw SchemaError(field, line_of(node), "expected an integer");
  }
}

std::string read_string(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw SchemaError(field, line_of(node), "expected a string");
  return node.as<std::string>();
}

Vector read_vector(const YAML::Node& node, const std::string& field, Index expected = -1) {
  if (!node.IsSequence()) throw SchemaError(field, line_of(node), "expected a list of numbers");
  Vector v(static_cast<Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v(static_cast<Index>(i)) = read_double(node[i], field);
  if (expected >= 0 && v.size() != expected) {
    throw SchemaError(field, line_of(node),
                      "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

Matrix read_matrix(const YAML::Node& node, const std::string& field, Index rows, Index cols) {
  if (!node.IsSequence()) throw SchemaError(field, line_of(node), "expected a list of rows");
  if (static_cast<Index>(node.size()) != rows) {
    throw SchemaError(field, line_of(node),
                      "expected " + std::to_string(rows) + " rows, got " + std::to_string(node.size()));
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = read_vector(node[static_cast<std::size_t>(i)], field, cols);
  return m;
}

std::vector<Vector> read_vector_list(const YAML::Node& node, const std::string& field, Index dim) {
  if (!node.IsSequence()) throw SchemaError(field, line_of(node), "expected a list of vectors");
  std::vector<Vector> out;
  for (const auto& item : node) out.push_back(read_vector(item, field, dim));
  return out;
}

void emit_vector(YAML::Emitter& e, const Vector& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < v.size(); ++i) e << v(i);
  e << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& e, const Matrix& m) {
  e << YAML::BeginSeq;
  for (Index i = 0; i < m.rows(); ++i) emit_vector(e, m.row(i).transpose());
  e << YAML::EndSeq;
}

template <typename Enum>
Enum parse_enum(const YAML::Node& node, const std::string& field,
                const std::vector<std::pair<std::string, Enum>>& options) {
  const std::string s = read_string(node, field);
  for (const auto& [name, value] : options) {
    if (name == s) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + name;
  throw SchemaError(field, line_of(node), "unknown value '" + s + "' (allowed: " + allowed + ")");
}

bool same_vectors(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                    [](const Vector& x, const Vector& y) { return linalg::identical(x, y); });
}

}  // namespace

std::string to_string(DynamicsFamily f) { return f == DynamicsFamily::linear ? "linear" : "growth"; }
std::string to_string(RewardFamily f) { return f == RewardFamily::quadratic ? "quadratic" : "log"; }
std::string to_string(OracleKind k) {
  switch (k) {
    case OracleKind::none: return "none";
    case OracleKind::riccati: return "riccati";
    case OracleKind::brute_force_qp: return "brute_force_qp";
    case OracleKind::brute_force_nlp: return "brute_force_nlp";
  }
  return "none";
}

const Matrix& DynamicsModel::A_at(Index t) const {
  for (const auto& o : overrides) {
    if (o.t == t && o.A.size() > 0) return o.A;
  }
  return A;
}

const Matrix& DynamicsModel::B_at(Index t) const {
  for (const auto& o : overrides) {
    if (o.t == t && o.B.size() > 0) return o.B;
  }
  return B;
}

bool identical(const ProblemDefinition& a, const ProblemDefinition& b) {
  auto same_overrides = [](const std::vector<StageOverride>& x, const std::vector<StageOverride>& y) {
    return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](const auto& l, const auto& r) {
      return l.t == r.t && linalg::identical(l.A, r.A) && linalg::identical(l.B, r.B);
    });
  };
  const auto& da = a.dynamics;
  const auto& db = b.dynamics;
  const auto& ra = a.reward;
  const auto& rb = b.reward;
  return a.name == b.name && a.state_dim == b.state_dim && a.control_dim == b.control_dim &&
         da.family == db.family && linalg::identical(da.A, db.A) && linalg::identical(da.B, db.B) &&
         linalg::identical(da.control_square, db.control_square) &&
         same_overrides(da.overrides, db.overrides) && da.alpha == db.alpha &&
         ra.family == rb.family && linalg::identical(ra.Q, rb.Q) && linalg::identical(ra.R, rb.R) &&
         linalg::identical(ra.q, rb.q) && linalg::identical(ra.r, rb.r) &&
         ra.discount == rb.discount && ra.control_index == rb.control_index &&
         a.state_domain == b.state_domain && a.control_set == b.control_set &&
         linalg::identical(a.initial_state, b.initial_state) &&
         same_vectors(a.reference_states, b.reference_states) &&
         same_vectors(a.reference_controls, b.reference_controls) && a.oracle == b.oracle &&
         a.hypothesis_profile == b.hypothesis_profile && a.notes == b.notes;
}

ControlSystem build_system(const ProblemDefinition& def) {
  const Index n = def.state_dim;
  const Index m = def.control_dim;
  if (n <= 0 || m <= 0) throw DimensionError("build_system: dimensions must be positive");
  ControlSystemParts parts;
  parts.state_dim = n;
  parts.control_dim = m;

  const DynamicsModel dyn = def.dynamics;
  const RewardModel rew = def.reward;
  DynamicsFn f;
  std::function<std::pair<Matrix, Matrix>(Index, const Vector&, const Vector&)> df;
  if (dyn.family == DynamicsFamily::linear) {
    auto check = [&](const Matrix& a, const Matrix& b) {
      if (a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != m) {
        throw DimensionError("build_system: A must be n x n and B n x m");
      }
    };
    check(dyn.A, dyn.B);
    for (const auto& o : dyn.overrides) check(o.A.size() ? o.A : dyn.A, o.B.size() ? o.B : dyn.B);
    const bool quad = dyn.control_square.size() > 0;
    if (quad && (dyn.control_square.rows() != n || dyn.control_square.cols() != m)) {
      throw DimensionError("build_system: control_square must be n x m");
    }
    f = [dyn, quad](Index t, const Vector& x, const Vector& u) {
      Vector out = dyn.A_at(t) * x + dyn.B_at(t) * u;
      if (quad) out += dyn.control_square * u.cwiseProduct(u);
      return out;
    };
    df = [dyn, quad](Index t, const Vector&, const Vector& u) {
      Matrix b = dyn.B_at(t);
      if (quad) b += 2.0 * dyn.control_square * u.asDiagonal();
      return std::pair<Matrix, Matrix>(dyn.A_at(t), b);
    };
  } else {
    if (n != 1 || m != 1) throw DimensionError("build_system: growth dynamics are scalar");
    const double alpha = dyn.alpha;
    f = [alpha](Index, const Vector& x, const Vector& u) {
      return Vector(Vector::Constant(1, std::pow(x(0), alpha) - u(0)));
    };
    df = [alpha](Index, const Vector& x, const Vector&) {
      return std::pair<Matrix, Matrix>(Matrix::Constant(1, 1, alpha * std::pow(x(0), alpha - 1.0)),
                                       Matrix::Constant(1, 1, -1.0));
    };
  }

  RewardFn phi;
  std::function<std::pair<Vector, Vector>(Index, const Vector&, const Vector&)> dphi;
  if (rew.family == RewardFamily::quadratic) {
    if (rew.Q.rows() != n || rew.Q.cols() != n || rew.R.rows() != m || rew.R.cols() != m ||
        (rew.q.size() != 0 && rew.q.size() != n) || (rew.r.size() != 0 && rew.r.size() != m)) {
      throw DimensionError("build_system: quadratic reward has inconsistent shapes");
    }
    const Vector q = rew.q.size() ? rew.q : Vector(Vector::Zero(n));
    const Vector r = rew.r.size() ? rew.r : Vector(Vector::Zero(m));
    const Matrix qs = 0.5 * (rew.Q + rew.Q.transpose());
    const Matrix rs = 0.5 * (rew.R + rew.R.transpose());
    const double beta = rew.discount;
    phi = [=](Index t, const Vector& x, const Vector& u) {
      const double w = std::pow(beta, static_cast<double>(t));
      return w * (-0.5 * x.dot(qs * x) - 0.5 * u.dot(rs * u) + q.dot(x) + r.dot(u));
    };
    dphi = [=](Index t, const Vector& x, const Vector& u) {
      const double w = std::pow(beta, static_cast<double>(t));
      return std::pair<Vector, Vector>(w * (q - qs * x), w * (r - rs * u));
    };
  } else {
    const Index k = rew.control_index;
    if (k < 0 || k >= m) throw DimensionError("build_system: log reward control_index out of range");
    const double beta = rew.discount;
    phi = [=](Index t, const Vector&, const Vector& u) {
      return std::pow(beta, static_cast<double>(t)) * std::log(u(k));
    };
    dphi = [=](Index t, const Vector&, const Vector& u) {
      Vector d = Vector::Zero(m);
      d(k) = std::pow(beta, static_cast<double>(t)) / u(k);
      return std::pair<Vector, Vector>(Vector::Zero(n), d);
    };
  }

  parts.dynamics = f;
  parts.reward = phi;
  parts.derivatives = [df, dphi](Index t, const Vector& x, const Vector& u) {
    auto [a, b] = df(t, x, u);
    auto [c, d] = dphi(t, x, u);
    return StageDerivatives{std::move(a), std::move(b), std::move(c), std::move(d)};
  };
  if (def.state_domain.dim() != n) throw DimensionError("build_system: state domain dimension");
  if (def.control_set.dim() != m) throw DimensionError("build_system: control set dimension");
  const StateDomain domain = def.state_domain;
  const PolyhedralSet controls = def.control_set;
  parts.state_domain = [domain](Index) { return domain; };
  parts.control_set = [controls](Index) { return controls; };
  return ControlSystem(std::move(parts));
}

InstanceBundle make_bundle(ProblemDefinition def) {
  ControlSystem system = build_system(def);
  if (def.initial_state.size() != def.state_dim) {
    throw DimensionError("make_bundle: initial state has wrong dimension");
  }
  Process reference(def.initial_state, def.reference_states, def.reference_controls);
  for (Index t = 0; t < reference.length(); ++t) {
    const Vector next = system.step(t, reference.state(t), reference.control(t));
    if ((next - reference.state(t + 1)).norm() > 1e-9 * (1.0 + next.norm())) {
      throw InfeasibleReferenceError("reference violates the dynamics at stage " + std::to_string(t));
    }
    if (!system.control_set(t).contains(reference.control(t))) {
      throw InfeasibleReferenceError("reference control leaves U_t at stage " + std::to_string(t));
    }
    if (!system.state_domain(t).contains(reference.state(t))) {
      throw InfeasibleReferenceError("reference state leaves X_t at stage " + std::to_string(t));
    }
  }
  return InstanceBundle{std::move(def), std::move(system), std::move(reference)};
}

std::vector<std::string> builtin_names() {
  return {"lq-stable", "lq-boundary-control", "ramsey-growth", "inert-control-abnormal",
          "rank-deficient-H4-fail"};
}

InstanceBundle builtin(const std::string& name) {
  if (name == "lq-stable") return make_bundle(lq_stable());
  if (name == "lq-boundary-control") return make_bundle(lq_boundary_control());
  if (name == "ramsey-growth") return make_bundle(ramsey_growth());
  if (name == "inert-control-abnormal") return make_bundle(inert_control_abnormal());
  if (name == "rank-deficient-H4-fail") return make_bundle(rank_deficient_h4_fail());
  throw UnknownInstanceError("unknown builtin instance '" + name + "'");
}

std::string to_yaml(const ProblemDefinition& def) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "format" << YAML::Value << 1;
  e << YAML::Key << "name" << YAML::Value << def.name;
  e << YAML::Key << "state_dim" << YAML::Value << def.state_dim;
  e << YAML::Key << "control_dim" << YAML::Value << def.control_dim;

  e << YAML::Key << "dynamics" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "family" << YAML::Value << to_string(def.dynamics.family);
  if (def.dynamics.family == DynamicsFamily::linear) {
    e << YAML::Key << "A" << YAML::Value;
    emit_matrix(e, def.dynamics.A);
    e << YAML::Key << "B" << YAML::Value;
    emit_matrix(e, def.dynamics.B);
    if (def.dynamics.control_square.size() > 0) {
      e << YAML::Key << "control_square" << YAML::Value;
      emit_matrix(e, def.dynamics.control_square);
    }
    if (!def.dynamics.overrides.empty()) {
      e << YAML::Key << "stages" << YAML::Value << YAML::BeginSeq;
      for (const auto& o : def.dynamics.overrides) {
        e << YAML::BeginMap << YAML::Key << "t" << YAML::Value << o.t;
        if (o.A.size() > 0) {
          e << YAML::Key << "A" << YAML::Value;
          emit_matrix(e, o.A);
        }
        if (o.B.size() > 0) {
          e << YAML::Key << "B" << YAML::Value;
          emit_matrix(e, o.B);
        }
        e << YAML::EndMap;
      }
      e << YAML::EndSeq;
    }
  } else {
    e << YAML::Key << "alpha" << YAML::Value << def.dynamics.alpha;
  }
  e << YAML::EndMap;

  e << YAML::Key << "reward" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "family" << YAML::Value << to_string(def.reward.family);
  e << YAML::Key << "discount" << YAML::Value << def.reward.discount;
  if (def.reward.family == RewardFamily::quadratic) {
    e << YAML::Key << "Q" << YAML::Value;
    emit_matrix(e, def.reward.Q);
    e << YAML::Key << "R" << YAML::Value;
    emit_matrix(e, def.reward.R);
    if (def.reward.q.size() > 0) {
      e << YAML::Key << "q" << YAML::Value;
      emit_vector(e, def.reward.q);
    }
    if (def.reward.r.size() > 0) {
      e << YAML::Key << "r" << YAML::Value;
      emit_vector(e, def.reward.r);
    }
  } else {
    e << YAML::Key << "control_index" << YAML::Value << def.reward.control_index;
  }
  e << YAML::EndMap;

  e << YAML::Key << "state_domain" << YAML::Value << YAML::BeginMap;
  if (def.state_domain.is_all_space()) {
    e << YAML::Key << "kind" << YAML::Value << "all_space";
  } else {
    e << YAML::Key << "kind" << YAML::Value << "open_box";
    e << YAML::Key << "lower" << YAML::Value;
    emit_vector(e, def.state_domain.lower());
    e << YAML::Key << "upper" << YAML::Value;
    emit_vector(e, def.state_domain.upper());
  }
  e << YAML::EndMap;

  e << YAML::Key << "control_set" << YAML::Value << YAML::BeginMap;
  switch (def.control_set.kind()) {
    case SetKind::all_space:
      e << YAML::Key << "kind" << YAML::Value << "all_space";
      break;
    case SetKind::box:
      e << YAML::Key << "kind" << YAML::Value << "box";
      e << YAML::Key << "lower" << YAML::Value;
      emit_vector(e, def.control_set.lower());
      e << YAML::Key << "upper" << YAML::Value;
      emit_vector(e, def.control_set.upper());
      break;
    case SetKind::half_spaces:
      e << YAML::Key << "kind" << YAML::Value << "half_spaces";
      e << YAML::Key << "normals" << YAML::Value;
      emit_matrix(e, def.control_set.normals());
      e << YAML::Key << "offsets" << YAML::Value;
      emit_vector(e, def.control_set.offsets());
      break;
  }
  e << YAML::EndMap;

  e << YAML::Key << "initial_state" << YAML::Value;
  emit_vector(e, def.initial_state);
  e << YAML::Key << "reference" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "states" << YAML::Value << YAML::BeginSeq;
  for (const auto& x : def.reference_states) emit_vector(e, x);
  e << YAML::EndSeq;
  e << YAML::Key << "controls" << YAML::Value << YAML::BeginSeq;
  for (const auto& u : def.reference_controls) emit_vector(e, u);
  e << YAML::EndSeq;
  e << YAML::EndMap;

  e << YAML::Key << "oracle" << YAML::Value << to_string(def.oracle);
  if (!def.hypothesis_profile.empty()) {
    e << YAML::Key << "hypothesis_profile" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : def.hypothesis_profile) e << YAML::Key << k << YAML::Value << v;
    e << YAML::EndMap;
  }
  if (!def.notes.empty()) e << YAML::Key << "notes" << YAML::Value << def.notes;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

ProblemDefinition parse_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& ex) {
    throw SchemaError("", ex.mark.line + 1, ex.msg);
  }
  if (!root || !root.IsMap()) throw SchemaError("", 1, "document must be a mapping");

  const Index format = read_index(require(root, "format", ""), "format");
  if (format != 1) throw SchemaError("format", line_of(root["format"]), "unsupported format version");

  ProblemDefinition def;
  def.name = read_string(require(root, "name", ""), "name");
  def.state_dim = read_index(require(root, "state_dim", ""), "state_dim");
  def.control_dim = read_index(require(root, "control_dim", ""), "control_dim");
  const Index n = def.state_dim;
  const Index m = def.control_dim;
  if (n <= 0) throw SchemaError("state_dim", line_of(root["state_dim"]), "must be positive");
  if (m <= 0) throw SchemaError("control_dim", line_of(root["control_dim"]), "must be positive");

  const YAML::Node dyn = require(root, "dynamics", "");
  def.dynamics.family = parse_enum<DynamicsFamily>(
      require(dyn, "family", "dynamics"), "dynamics.family",
      {{"linear", DynamicsFamily::linear}, {"growth", DynamicsFamily::growth}});
  if (def.dynamics.family == DynamicsFamily::linear) {
    def.dynamics.A = read_matrix(require(dyn, "A", "dynamics"), "dynamics.A", n, n);
    def.dynamics.B = read_matrix(require(dyn, "B", "dynamics"), "dynamics.B", n, m);
    if (dyn["control_square"]) {
      def.dynamics.control_square =
          read_matrix(dyn["control_square"], "dynamics.control_square", n, m);
    }
    if (const YAML::Node stages = dyn["stages"]) {
      if (!stages.IsSequence()) throw SchemaError("dynamics.stages", line_of(stages), "expected a list");
      for (const auto& s : stages) {
        StageOverride o;
        o.t = read_index(require(s, "t", "dynamics.stages"), "dynamics.stages.t");
        if (o.t < 0) throw SchemaError("dynamics.stages.t", line_of(s), "stage must be nonnegative");
        if (s["A"]) o.A = read_matrix(s["A"], "dynamics.stages.A", n, n);
        if (s["B"]) o.B = read_matrix(s["B"], "dynamics.stages.B", n, m);
        def.dynamics.overrides.push_back(std::move(o));
      }
    }
  } else {
    if (n != 1 || m != 1) throw SchemaError("dynamics.family", line_of(dyn), "growth dynamics are scalar");
    def.dynamics.alpha = read_double(require(dyn, "alpha", "dynamics"), "dynamics.alpha");
  }

  const YAML::Node rew = require(root, "reward", "");
  def.reward.family = parse_enum<RewardFamily>(
      require(rew, "family", "reward"), "reward.family",
      {{"quadratic", RewardFamily::quadratic}, {"log", RewardFamily::log}});
  if (rew["discount"]) def.reward.discount = read_double(rew["discount"], "reward.discount");
  if (def.reward.family == RewardFamily::quadratic) {
    def.reward.Q = read_matrix(require(rew, "Q", "reward"), "reward.Q", n, n);
    def.reward.R = read_matrix(require(rew, "R", "reward"), "reward.R", m, m);
    if (rew["q"]) def.reward.q = read_vector(rew["q"], "reward.q", n);
    if (rew["r"]) def.reward.r = read_vector(rew["r"], "reward.r", m);
  } else {
    def.reward.control_index = read_index(require(rew, "control_index", "reward"), "reward.control_index");
    if (def.reward.control_index < 0 || def.reward.control_index >= m) {
      throw SchemaError("reward.control_index", line_of(rew), "out of range");
    }
  }

  const YAML::Node dom = require(root, "state_domain", "");
  const std::string dom_kind = read_string(require(dom, "kind", "state_domain"), "state_domain.kind");
  try {
    if (dom_kind == "all_space") {
      def.state_domain = StateDomain::all_space(n);
    } else if (dom_kind == "open_box") {
      def.state_domain = StateDomain::open_box(
          read_vector(require(dom, "lower", "state_domain"), "state_domain.lower", n),
          read_vector(require(dom, "upper", "state_domain"), "state_domain.upper", n));
    } else {
      throw SchemaError("state_domain.kind", line_of(dom), "unknown kind '" + dom_kind + "'");
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& ex) {
    throw SchemaError("state_domain", line_of(dom), ex.what());
  }

  const YAML::Node cs = require(root, "control_set", "");
  const std::string cs_kind = read_string(require(cs, "kind", "control_set"), "control_set.kind");
  try {
    if (cs_kind == "all_space") {
      def.control_set = PolyhedralSet::all_space(m);
    } else if (cs_kind == "box") {
      def.control_set = PolyhedralSet::box(
          read_vector(require(cs, "lower", "control_set"), "control_set.lower", m),
          read_vector(require(cs, "upper", "control_set"), "control_set.upper", m));
    } else if (cs_kind == "half_spaces") {
      const YAML::Node normals = require(cs, "normals", "control_set");
      const Index rows = normals.IsSequence() ? static_cast<Index>(normals.size()) : 0;
      def.control_set = PolyhedralSet::half_spaces(
          read_matrix(normals, "control_set.normals", rows, m),
          read_vector(require(cs, "offsets", "control_set"), "control_set.offsets", rows));
    } else {
      throw SchemaError("control_set.kind", line_of(cs), "unknown kind '" + cs_kind + "'");
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& ex) {
    throw SchemaError("control_set", line_of(cs), ex.what());
  }

  def.initial_state = read_vector(require(root, "initial_state", ""), "initial_state", n);
  const YAML::Node ref = require(root, "reference", "");
  def.reference_states = read_vector_list(require(ref, "states", "reference"), "reference.states", n);
  def.reference_controls =
      read_vector_list(require(ref, "controls", "reference"), "reference.controls", m);
  if (def.reference_states.size() != def.reference_controls.size() + 1) {
    throw SchemaError("reference", line_of(ref), "need exactly one more state than controls");
  }
  if (def.reference_controls.empty()) {
    throw SchemaError("reference.controls", line_of(ref), "at least one stage is required");
  }

  if (root["oracle"]) {
    def.oracle = parse_enum<OracleKind>(root["oracle"], "oracle",
                                        {{"none", OracleKind::none},
                                         {"riccati", OracleKind::riccati},
                                         {"brute_force_qp", OracleKind::brute_force_qp},
                                         {"brute_force_nlp", OracleKind::brute_force_nlp}});
  }
  if (const YAML::Node prof = root["hypothesis_profile"]) {
    if (!prof.IsMap()) throw SchemaError("hypothesis_profile", line_of(prof), "expected a mapping");
    for (const auto& kv : prof) {
      const std::string key = kv.first.as<std::string>();
      const std::string value = read_string(kv.second, "hypothesis_profile." + key);
      if (value != "pass" && value != "fail" && value != "automatic" && value != "not-checked") {
        throw SchemaError("hypothesis_profile." + key, line_of(kv.second), "unknown verdict '" + value + "'");
      }
      def.hypothesis_profile[key] = value;
    }
  }
  if (root["notes"]) def.notes = read_string(root["notes"], "notes");
  return def;
}

void save(const InstanceBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("save: cannot open " + path.string());
  out << to_yaml(bundle.definition);
  if (!out) throw Error("save: write failed for " + path.string());
}

InstanceBundle load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("load: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  ProblemDefinition def = parse_yaml(buffer.str());
  try {
    return make_bundle(std::move(def));
  } catch (const InfeasibleReferenceError& ex) {
    throw SchemaError("reference", -1, ex.what());
  } catch (const DimensionError& ex) {
    throw SchemaError("", -1, ex.what());
  }
}

InstanceBundle resolve_instance(const std::string& name_or_path) {
  const auto names = builtin_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin(name_or_path);
  if (std::filesystem::exists(name_or_path)) return load(name_or_path);
  throw UnknownInstanceError("'" + name_or_path + "' is neither a builtin instance nor a file");
}

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  Matrix P = Q;
  for (int iter = 0; iter < 100000; ++iter) {
    const Matrix K = lqr_gain(A, B, R, P);
    Matrix next = Q + A.transpose() * P * (A - B * K);
    next = 0.5 * (next + next.transpose());
    const double change = (next - P).norm();
    P = std::move(next);
    if (change <= 1e-14 * (1.0 + P.norm())) return P;
  }
  throw Error("solve_dare: fixed-point iteration did not converge");
}

Vector solve_box_qp(const Matrix& H, const Vector& f, const Vector& lower, const Vector& upper) {
  const Index n = H.rows();
  if (H.cols() != n || f.size() != n || lower.size() != n || upper.size() != n) {
    throw DimensionError("solve_box_qp: inconsistent sizes");
  }
  // Primal active set with feasible iterates; finite for strictly convex H.
  // 0 free, 1 at lower, 2 at upper
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  Vector u = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    u(i) = std::clamp(0.0, lower(i), upper(i));
    if (u(i) == lower(i)) state[static_cast<std::size_t>(i)] = 1;
    else if (u(i) == upper(i)) state[static_cast<std::size_t>(i)] = 2;
  }
  const double scale = 1.0 + f.cwiseAbs().maxCoeff() + H.cwiseAbs().maxCoeff();
  for (int iter = 0; iter < 50 * static_cast<int>(n) + 50; ++iter) {
    std::vector<Index> free_idx;
    for (Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == 0) free_idx.push_back(i);
    }
    const auto nf = static_cast<Index>(free_idx.size());
    Vector step = Vector::Zero(n);
    if (nf > 0) {
      const Vector grad = H * u + f;
      Matrix hff(nf, nf);
      Vector rhs(nf);
      for (Index a = 0; a < nf; ++a) {
        rhs(a) = -grad(free_idx[static_cast<std::size_t>(a)]);
        for (Index b = 0; b < nf; ++b) {
          hff(a, b) = H(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
        }
      }
      const Vector sf = hff.ldlt().solve(rhs);
      for (Index a = 0; a < nf; ++a) step(free_idx[static_cast<std::size_t>(a)]) = sf(a);
    }
    if (step.cwiseAbs().maxCoeff() > 1e-14 * (1.0 + u.cwiseAbs().maxCoeff())) {
      double alpha = 1.0;
      Index blocking = -1;
      int bound = 0;
      for (Index i : free_idx) {
        if (step(i) < 0.0 && std::isfinite(lower(i))) {
          const double a = (lower(i) - u(i)) / step(i);
          if (a < alpha) alpha = a, blocking = i, bound = 1;
        } else if (step(i) > 0.0 && std::isfinite(upper(i))) {
          const double a = (upper(i) - u(i)) / step(i);
          if (a < alpha) alpha = a, blocking = i, bound = 2;
        }
      }
      u += std::max(alpha, 0.0) * step;
      if (blocking >= 0) {
        state[static_cast<std::size_t>(blocking)] = bound;
        u(blocking) = bound == 1 ? lower(blocking) : upper(blocking);
      }
      continue;
    }
    // Stationary on the working set: release the worst wrong-signed bound.
    const Vector grad = H * u + f;
    Index worst = -1;
    double worst_value = 1e-12 * scale;
    for (Index i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      const double wrong = s == 1 ? -grad(i) : s == 2 ? grad(i) : 0.0;
      if (wrong > worst_value) worst_value = wrong, worst = i;
    }
    if (worst < 0) break;
    state[static_cast<std::size_t>(worst)] = 0;
  }
  const Vector grad = H * u + f;
  for (Index i = 0; i < n; ++i) {
    const bool ok_bounds = u(i) >= lower(i) - 1e-12 && u(i) <= upper(i) + 1e-12;
    const int s = state[static_cast<std::size_t>(i)];
    const bool ok_sign = s == 0   ? std::abs(grad(i)) <= 1e-9 * scale
                         : s == 1 ? grad(i) >= -1e-9 * scale
                                  : grad(i) <= 1e-9 * scale;
    if (!ok_bounds || !ok_sign) throw Error("solve_box_qp: active-set iteration failed to reach KKT");
  }
  return u;
}

std::vector<Vector> riccati_oracle(const InstanceBundle& bundle, Index h) {
  const ProblemDefinition& def = bundle.definition;
  const bool lq = def.dynamics.family == DynamicsFamily::linear &&
                  (def.dynamics.control_square.size() == 0 || def.dynamics.control_square.isZero()) &&
                  def.reward.family == RewardFamily::quadratic && def.reward.discount == 1.0 &&
                  (def.reward.q.size() == 0 || def.reward.q.isZero()) &&
                  (def.reward.r.size() == 0 || def.reward.r.isZero()) &&
                  def.control_set.kind() == SetKind::all_space;
  if (!lq) throw Error("riccati_oracle: instance '" + def.name + "' is not an unconstrained LQ problem");
  if (h < 1 || bundle.reference.length() < h + 1) throw DimensionError("riccati_oracle: bad horizon");

  const Index n = def.state_dim;
  const Matrix Q = 0.5 * (def.reward.Q + def.reward.Q.transpose());
  const Matrix R = 0.5 * (def.reward.R + def.reward.R.transpose());
  Eigen::LDLT<Matrix> r_ldlt(R);
  if (r_ldlt.info() != Eigen::Success || !r_ldlt.isPositive()) {
    throw Error("riccati_oracle: R must be positive definite");
  }
  const Matrix I = Matrix::Identity(n, n);

  // Minimization costates lambda_t = P_t x_t + S_t nu, nu = lambda_{h+1}.
  std::vector<Matrix> P(static_cast<std::size_t>(h + 2)), S(static_cast<std::size_t>(h + 2));
  std::vector<Matrix> M(static_cast<std::size_t>(h + 1)), G(static_cast<std::size_t>(h + 1));
  P[static_cast<std::size_t>(h + 1)] = Matrix::Zero(n, n);
  S[static_cast<std::size_t>(h + 1)] = I;
  for (Index t = h; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    const Matrix& A = def.dynamics.A_at(t);
    const Matrix& B = def.dynamics.B_at(t);
    G[k] = B * r_ldlt.solve(B.transpose());
    M[k] = (I + G[k] * P[k + 1]).lu().inverse();
    P[k] = Q + A.transpose() * P[k + 1] * M[k] * A;
    S[k] = A.transpose() * (I - P[k + 1] * M[k] * G[k]) * S[k + 1];
  }
  // x_t = X_t sigma + Y_t nu
  Matrix X = I, Y = Matrix::Zero(n, n);
  std::vector<Matrix> xs{X}, ys{Y};
  for (Index t = 0; t <= h; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const Matrix MA = M[k] * def.dynamics.A_at(t);
    const Matrix shift = M[k] * G[k] * S[k + 1];
    X = MA * X;
    Y = MA * Y - shift;
    xs.push_back(X);
    ys.push_back(Y);
  }
  const Vector& sigma = bundle.reference.initial_state();
  const Vector target = bundle.reference.state(h + 1) - X * sigma;
  const Vector nu = Y.fullPivLu().solve(target);
  if ((Y * nu - target).norm() > 1e-8 * (1.0 + target.norm())) {
    throw Error("riccati_oracle: terminal pin is not reachable at this horizon");
  }
  std::vector<Vector> p;
  for (Index t = 1; t <= h + 1; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const Vector x = xs[k] * sigma + ys[k] * nu;
    p.push_back(-(P[k] * x + S[k] * nu));
  }
  return p;
}

}  // namespace pontryagin
