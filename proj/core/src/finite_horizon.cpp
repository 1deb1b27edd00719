#include "pontryagin/finite_horizon.hpp"

#include "pontryagin/linalg.hpp"
#include "pontryagin/lp.hpp"
#include "pontryagin/operator_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

namespace pontryagin {
namespace {

struct StageCone {
  Matrix lineality;
  Matrix rays;
};

std::vector<StageCone> decompose_all(const std::vector<PolyhedralSet>& cones) {
  std::vector<StageCone> out;
  out.reserve(cones.size());
  for (const auto& cone : cones) {
    auto g = decompose_cone(cone);
    out.push_back({std::move(g.lineality), std::move(g.rays)});
  }
  return out;
}

Matrix vstack(const std::vector<Matrix>& parts, Index cols) {
  Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

Vector vstack(const std::vector<Vector>& parts) {
  Index rows = 0;
  for (const auto& p : parts) rows += p.size();
  Vector out(rows);
  Index r = 0;
  for (const auto& p : parts) {
    out.segment(r, p.size()) = p;
    r += p.size();
  }
  return out;
}

double max_or_neg_inf(const Vector& v) { return v.size() == 0 ? -kInfinity : v.maxCoeff(); }

// The stationarity system in terms of mu = p_{h+1}:
//   equalities  E mu + lambda0 f = 0   (lineality spaces)
//   rays        G mu + lambda0 g <= 0  (cone generators)
struct StationaritySystem {
  Matrix E;
  Vector f;
  Matrix G;
  Vector g;
};

StationaritySystem stationarity_system(const std::vector<LinearizedStage>& blocks,
                                       const std::vector<StageCone>& cones) {
  const auto h = static_cast<Index>(blocks.size()) - 1;
  const Index n = blocks.front().A.rows();
  // p_{t+1} = Phi[t+1] mu + lambda0 psi[t+1]
  std::vector<Matrix> phi(static_cast<std::size_t>(h + 2));
  std::vector<Vector> psi(static_cast<std::size_t>(h + 2));
  phi[static_cast<std::size_t>(h + 1)] = Matrix::Identity(n, n);
  psi[static_cast<std::size_t>(h + 1)] = Vector::Zero(n);
  for (Index t = h; t >= 1; --t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    phi[static_cast<std::size_t>(t)] = s.A.transpose() * phi[static_cast<std::size_t>(t + 1)];
    psi[static_cast<std::size_t>(t)] = s.A.transpose() * psi[static_cast<std::size_t>(t + 1)] + s.c;
  }
  std::vector<Matrix> e_rows, g_rows;
  std::vector<Vector> f_rhs, g_rhs;
  for (Index t = 0; t <= h; ++t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    const auto& cone = cones[static_cast<std::size_t>(t)];
    const Matrix gt = s.B.transpose() * phi[static_cast<std::size_t>(t + 1)];
    const Vector et = s.B.transpose() * psi[static_cast<std::size_t>(t + 1)] + s.d;
    e_rows.push_back(cone.lineality.transpose() * gt);
    f_rhs.push_back(cone.lineality.transpose() * et);
    g_rows.push_back(cone.rays.transpose() * gt);
    g_rhs.push_back(cone.rays.transpose() * et);
  }
  return {vstack(e_rows, n), vstack(f_rhs), vstack(g_rows, n), vstack(g_rhs)};
}

MultiplierSet assemble_set(const std::vector<LinearizedStage>& blocks, double lambda0,
                           const Vector& mu) {
  const auto h = static_cast<Index>(blocks.size()) - 1;
  MultiplierSet ms;
  ms.h = h;
  ms.lambda0 = lambda0;
  ms.p.assign(static_cast<std::size_t>(h + 1), Vector());
  ms.p[static_cast<std::size_t>(h)] = mu;
  for (Index t = h; t >= 1; --t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    ms.p[static_cast<std::size_t>(t - 1)] =
        s.A.transpose() * ms.p[static_cast<std::size_t>(t)] + lambda0 * s.c;
  }
  ms.q1 = blocks[0].B.transpose() * ms.p[0];
  ms.q2 = blocks[1].B.transpose() * ms.p[1];
  return ms;
}

double violation(const StationaritySystem& sys, const Vector& mu, double lambda0) {
  double eq = 0.0;
  if (sys.E.rows() > 0) eq = (sys.E * mu + lambda0 * sys.f).cwiseAbs().maxCoeff();
  double ray = 0.0;
  if (sys.G.rows() > 0) ray = std::max(0.0, (sys.G * mu + lambda0 * sys.g).maxCoeff());
  return std::max(eq, ray);
}

std::optional<Vector> normal_branch(const StationaritySystem& sys, Index n,
                                    const MultiplierOptions& opt) {
  Vector mu = Vector::Zero(n);
  if (sys.E.rows() > 0) mu = least_norm_preimage(sys.E, -sys.f, opt.rank_tolerance).x;
  if (violation(sys, mu, 1.0) <= opt.vi_tolerance) return mu;

  // Ray inequalities fail at the least-squares point: move within null(E).
  const Matrix null_e = sys.E.rows() > 0 ? linalg::null_space_basis(sys.E, opt.rank_tolerance)
                                         : Matrix(Matrix::Identity(n, n));
  const Index k = null_e.cols();
  if (k == 0 || sys.G.rows() == 0) return std::nullopt;
  const Index r = sys.G.rows();
  lp::LinearProgram prog;
  prog.objective = Vector::Zero(k + 1);
  prog.objective(k) = -1.0;  // minimize the worst ray value s
  prog.ub_matrix = Matrix::Zero(r + 1, k + 1);
  prog.ub_matrix.topLeftCorner(r, k) = sys.G * null_e;
  prog.ub_matrix.block(0, k, r, 1).setConstant(-1.0);
  prog.ub_matrix(r, k) = -1.0;
  prog.ub_rhs = Vector(r + 1);
  prog.ub_rhs.head(r) = -(sys.G * mu + sys.g);
  prog.ub_rhs(r) = 1.0;  // s >= -1 keeps the program bounded
  prog.free_variable.assign(static_cast<std::size_t>(k + 1), true);
  const auto sol = lp::solve(prog);
  if (sol.status != lp::Status::optimal) return std::nullopt;
  const Vector moved = mu + null_e * sol.x.head(k);
  if (violation(sys, moved, 1.0) <= opt.vi_tolerance) return moved;
  return std::nullopt;
}

std::optional<Vector> abnormal_branch(const StationaritySystem& sys, Index n,
                                      const MultiplierOptions& opt) {
  const Matrix null_e = sys.E.rows() > 0 ? linalg::null_space_basis(sys.E, opt.rank_tolerance)
                                         : Matrix(Matrix::Identity(n, n));
  const Index k = null_e.cols();
  if (k == 0) return std::nullopt;
  if (sys.G.rows() == 0) return Vector(null_e.col(0));

  const Matrix gn = sys.G * null_e;
  const Index r = gn.rows();
  lp::LinearProgram prog;
  prog.ub_matrix = Matrix::Zero(r + 2 * k, k);
  prog.ub_matrix.topRows(r) = gn;
  prog.ub_matrix.middleRows(r, k) = Matrix::Identity(k, k);
  prog.ub_matrix.bottomRows(k) = -Matrix::Identity(k, k);
  prog.ub_rhs = Vector::Zero(r + 2 * k);
  prog.ub_rhs.tail(2 * k).setOnes();
  prog.free_variable.assign(static_cast<std::size_t>(k), true);
  for (Index i = 0; i < k; ++i) {
    for (double sign : {1.0, -1.0}) {
      prog.objective = Vector::Zero(k);
      prog.objective(i) = sign;
      const auto sol = lp::solve(prog);
      if (sol.status != lp::Status::optimal || sol.value <= 1e-9) continue;
      Vector mu = null_e * sol.x;
      const double nrm = mu.norm();
      if (nrm <= 1e-12) continue;
      mu /= nrm;
      if (violation(sys, mu, 0.0) <= opt.vi_tolerance) return mu;
    }
  }
  return std::nullopt;
}

}  // namespace

TruncatedProblem::TruncatedProblem(ControlSystem system, Process reference, Index h)
    : system_(std::move(system)), reference_(reference.prefix(h + 1)), h_(h) {}

Index TruncatedProblem::decision_size() const {
  return h_ * system_.state_dim() + (h_ + 1) * system_.control_dim();
}

Vector TruncatedProblem::reference_decision() const {
  const Index n = system_.state_dim();
  const Index m = system_.control_dim();
  Vector w(decision_size());
  for (Index t = 1; t <= h_; ++t) w.segment((t - 1) * n, n) = reference_.state(t);
  for (Index t = 0; t <= h_; ++t) w.segment(h_ * n + t * m, m) = reference_.control(t);
  return w;
}

Process TruncatedProblem::process_from_decision(const Vector& decision) const {
  if (decision.size() != decision_size()) throw DimensionError("decision vector size mismatch");
  const Index n = system_.state_dim();
  const Index m = system_.control_dim();
  std::vector<Vector> xs{sigma()};
  std::vector<Vector> us;
  for (Index t = 1; t <= h_; ++t) xs.push_back(decision.segment((t - 1) * n, n));
  xs.push_back(terminal_state());
  for (Index t = 0; t <= h_; ++t) us.push_back(decision.segment(h_ * n + t * m, m));
  return Process(sigma(), std::move(xs), std::move(us));
}

TruncatedProblem truncate(const ControlSystem& system, const Process& reference, Index h,
                          double tol) {
  if (h < 1) throw DimensionError("truncate: horizon must be at least 1");
  if (reference.length() < h + 1) {
    throw InfeasibleReferenceError("truncate: reference has " + std::to_string(reference.length()) +
                                   " stages, need " + std::to_string(h + 1));
  }
  for (Index t = 0; t <= h; ++t) {
    const Vector next = system.step(t, reference.state(t), reference.control(t));
    const double err = (reference.state(t + 1) - next).norm();
    if (err > tol * (1.0 + next.norm())) {
      throw InfeasibleReferenceError("truncate: reference violates the dynamics at stage " +
                                     std::to_string(t));
    }
    if (!system.control_set(t).contains(reference.control(t))) {
      throw InfeasibleReferenceError("truncate: reference control leaves U_t at stage " +
                                     std::to_string(t));
    }
  }
  return TruncatedProblem(system, reference, h);
}

double objective(const TruncatedProblem& problem, const Vector& decision) {
  const Process p = problem.process_from_decision(decision);
  double s = 0.0;
  for (Index t = 0; t <= problem.h(); ++t) s += problem.system().reward(t, p.state(t), p.control(t));
  return s;
}

Vector constraint_map(const TruncatedProblem& problem, const Vector& decision) {
  const Process p = problem.process_from_decision(decision);
  const Index n = problem.system().state_dim();
  Vector g((problem.h() + 1) * n);
  for (Index t = 0; t <= problem.h(); ++t) {
    g.segment(t * n, n) = problem.system().step(t, p.state(t), p.control(t)) - p.state(t + 1);
  }
  return g;
}

ConstraintLinearization assemble(std::vector<LinearizedStage> blocks) {
  if (blocks.size() < 2) throw DimensionError("assemble: need stages 0..h with h >= 1");
  const auto h = static_cast<Index>(blocks.size()) - 1;
  const Index n = blocks.front().A.rows();
  const Index m = blocks.front().B.cols();
  for (Index t = 0; t <= h; ++t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    if (s.t != t) throw DimensionError("assemble: stage " + std::to_string(t) + " out of order");
    if (s.A.rows() != n || s.A.cols() != n || s.B.rows() != n || s.B.cols() != m ||
        s.c.size() != n || s.d.size() != m) {
      throw DimensionError("assemble: inconsistent block shapes at stage " + std::to_string(t));
    }
  }
  ConstraintLinearization lin;
  lin.h = h;
  lin.state_dim = n;
  lin.control_dim = m;
  lin.assembled = Matrix::Zero((h + 1) * n, h * n + (h + 1) * m);
  for (Index t = 0; t <= h; ++t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    const Index row = t * n;
    if (t <= h - 1) lin.assembled.block(row, t * n, n, n) = -Matrix::Identity(n, n);
    if (t >= 1) lin.assembled.block(row, (t - 1) * n, n, n) = s.A;
    lin.assembled.block(row, h * n + t * m, n, m) = s.B;
  }
  lin.blocks = std::move(blocks);
  return lin;
}

ConstraintLinearization assemble_constraints(const TruncatedProblem& problem,
                                             const LinearizeOptions& options) {
  std::vector<LinearizedStage> blocks;
  for (Index t = 0; t <= problem.h(); ++t) {
    blocks.push_back(linearize(problem.system(), problem.reference(), t, options));
  }
  return assemble(std::move(blocks));
}

SurjectivityReport check_closedness_surjectivity(const ConstraintLinearization& lin,
                                                 double rank_tolerance) {
  const RangeReport rr = range_report(lin.assembled, rank_tolerance);
  SurjectivityReport out;
  out.rank = rr.numerical_rank;
  out.rows = rr.rows;
  out.surjective = rr.surjective;
  out.margin = rr.smallest_positive_singular_value;
  return out;
}

Vector constructive_preimage(const ConstraintLinearization& lin, const Vector& z,
                             double rank_tolerance) {
  const Index h = lin.h;
  const Index n = lin.state_dim;
  const Index m = lin.control_dim;
  if (z.size() != (h + 1) * n) throw DimensionError("constructive_preimage: z has wrong size");
  const auto& blk = lin.blocks;
  auto zt = [&](Index t) { return z.segment(t * n, n); };

  std::vector<Vector> y(static_cast<std::size_t>(h + 1), Vector::Zero(n));  // y[0] = 0
  std::vector<Vector> v(static_cast<std::size_t>(h + 1), Vector::Zero(m));
  for (Index t = 0; t <= h - 2; ++t) {
    const auto& s = blk[static_cast<std::size_t>(t)];
    Matrix l(n, n + m);
    l << -Matrix::Identity(n, n), s.B;
    const Vector rhs = zt(t) - s.A * y[static_cast<std::size_t>(t)];
    const Vector sol = least_norm_preimage(l, rhs, rank_tolerance).x;
    y[static_cast<std::size_t>(t + 1)] = sol.head(n);
    v[static_cast<std::size_t>(t)] = sol.tail(m);
  }

  const auto& last = blk[static_cast<std::size_t>(h)];
  const auto& prev = blk[static_cast<std::size_t>(h - 1)];
  const Vector& y_prev = y[static_cast<std::size_t>(h - 1)];
  Matrix lambda(n, 2 * m);
  lambda << last.A * prev.B, last.B;
  const Vector rhs = zt(h) + last.A * zt(h - 1) - last.A * prev.A * y_prev;
  const Preimage pre = least_norm_preimage(lambda, rhs, rank_tolerance);
  if (pre.residual > 1e-8 * (1.0 + rhs.norm())) {
    throw HypothesisError("constructive_preimage: terminal right-hand side outside the range of "
                          "[A_h B_{h-1}, B_h] (residual " + std::to_string(pre.residual) + ")");
  }
  v[static_cast<std::size_t>(h - 1)] = pre.x.head(m);
  v[static_cast<std::size_t>(h)] = pre.x.tail(m);
  y[static_cast<std::size_t>(h)] = prev.A * y_prev + prev.B * v[static_cast<std::size_t>(h - 1)] - zt(h - 1);

  Vector out(h * n + (h + 1) * m);
  for (Index t = 1; t <= h; ++t) out.segment((t - 1) * n, n) = y[static_cast<std::size_t>(t)];
  for (Index t = 0; t <= h; ++t) out.segment(h * n + t * m, m) = v[static_cast<std::size_t>(t)];
  return out;
}

BoundCertificate preimage_bound(const ConstraintLinearization& lin, const BoundOptions& options) {
  const Index h = lin.h;
  const Index n = lin.state_dim;
  const Index m = lin.control_dim;
  const auto& blk = lin.blocks;
  const double rt = options.rank_tolerance;

  for (Index t = 1; t <= h; ++t) {
    const auto& s = blk[static_cast<std::size_t>(t)];
    Matrix df(n, n + m);
    df << s.A, s.B;
    const auto rs = sum_of_ranges_equals(s.A * blk[static_cast<std::size_t>(t - 1)].B, s.B, df, rt);
    if (!rs.equal) {
      throw HypothesisError("preimage_bound: range condition fails at stage " + std::to_string(t));
    }
  }

  BoundCertificate cert;
  cert.h = h;
  auto inv_sigma = [&](const Matrix& op) {
    const double s = range_report(op, rt).smallest_positive_singular_value;
    if (s <= 0.0) throw HypothesisError("preimage_bound: zero operator in the construction");
    return 1.0 / s;
  };

  double a = 0.0;  // a_{t-1}, with a_{-1} = 0
  for (Index t = 0; t <= h - 2; ++t) {
    const auto& s = blk[static_cast<std::size_t>(t)];
    Matrix l(n, n + m);
    l << -Matrix::Identity(n, n), s.B;
    const double b = inv_sigma(l);
    cert.forward_b.push_back(b);
    const double norm_a = t == 0 ? 0.0 : linalg::spectral_norm(s.A);
    a = std::max(a, b * (1.0 + a * norm_a));
    cert.constants.push_back(a);
  }

  const auto& last = blk[static_cast<std::size_t>(h)];
  const auto& prev = blk[static_cast<std::size_t>(h - 1)];
  Matrix lambda(n, 2 * m);
  lambda << last.A * prev.B, last.B;
  cert.c = inv_sigma(lambda);
  cert.c1 = cert.c * (1.0 + linalg::spectral_norm(last.A) +
                      a * linalg::spectral_norm(last.A * prev.A));
  cert.c2 = cert.c1 * linalg::spectral_norm(prev.B) + a * linalg::spectral_norm(prev.A) + 1.0;
  const double a_h = std::max({a, cert.c1, cert.c2});
  cert.constants.push_back(a_h);
  cert.constants.push_back(a_h);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  cert.all_passed = true;
  for (Index k = 0; k < options.samples; ++k) {
    Vector w(lin.assembled.cols());
    for (Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
    BoundSample sample;
    sample.z = lin.assembled * w;
    const Vector pre = constructive_preimage(lin, sample.z, rt);
    sample.residual = (lin.assembled * pre - sample.z).norm();
    double num = 0.0;
    for (Index t = 0; t < h; ++t) num = std::max(num, pre.segment(t * n, n).norm());
    for (Index t = 0; t <= h; ++t) num = std::max(num, pre.segment(h * n + t * m, m).norm());
    double den = 0.0;
    for (Index t = 0; t <= h; ++t) den = std::max(den, sample.z.segment(t * n, n).norm());
    sample.ratio = den > 0.0 ? num / den : 0.0;
    sample.ok = sample.residual <= options.residual_tol && sample.ratio <= a_h * (1.0 + 1e-10);
    cert.all_passed = cert.all_passed && sample.ok;
    cert.samples.push_back(std::move(sample));
  }
  return cert;
}

const Vector& MultiplierSet::costate(Index t) const {
  if (t < 1 || t > h + 1) throw DimensionError("MultiplierSet: costate index out of range");
  return p[static_cast<std::size_t>(t - 1)];
}

std::vector<PolyhedralSet> reference_cones(const TruncatedProblem& problem, double tol) {
  std::vector<PolyhedralSet> out;
  for (Index t = 0; t <= problem.h(); ++t) {
    out.push_back(tangent_cone(problem.system().control_set(t), problem.reference().control(t), tol));
  }
  return out;
}

MultiplierSet compute_multipliers(const TruncatedProblem& problem,
                                  const ConstraintLinearization& lin,
                                  const MultiplierOptions& options) {
  if (lin.h != problem.h()) throw DimensionError("compute_multipliers: horizon mismatch");
  const auto cones = decompose_all(reference_cones(problem, options.membership_tolerance));
  const StationaritySystem sys = stationarity_system(lin.blocks, cones);
  const Index n = lin.state_dim;

  if (options.mode == MultiplierMode::normal_first) {
    if (auto mu = normal_branch(sys, n, options)) return assemble_set(lin.blocks, 1.0, *mu);
  }
  if (auto mu = abnormal_branch(sys, n, options)) return assemble_set(lin.blocks, 0.0, *mu);
  throw NoMultiplierError("compute_multipliers: no multiplier at horizon " +
                          std::to_string(problem.h()) +
                          " (reference likely not optimal or hypotheses fail)");
}

Matrix stage_image_generators(const LinearizedStage& stage, const PolyhedralSet& cone) {
  return stage.B * decompose_cone(cone).generating_set();
}

NontrivialityReport check_nontriviality(const MultiplierSet& ms, const Matrix& z0_generators,
                                        const Matrix& z1_generators, double floor) {
  NontrivialityReport out;
  out.lambda0 = ms.lambda0;
  out.p1_restricted = linalg::projected_norm(ms.costate(1), z0_generators);
  out.p2_restricted = linalg::projected_norm(ms.costate(2), z1_generators);
  out.margin = out.lambda0 + out.p1_restricted + out.p2_restricted;
  out.nontrivial = out.margin > floor;
  return out;
}

std::vector<double> adjoint_residuals(const MultiplierSet& ms,
                                      const std::vector<LinearizedStage>& blocks) {
  std::vector<double> out;
  for (Index t = 1; t <= ms.h; ++t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    out.push_back((ms.costate(t) - s.A.transpose() * ms.costate(t + 1) - ms.lambda0 * s.c).norm());
  }
  return out;
}

std::vector<double> vi_violations(const MultiplierSet& ms,
                                  const std::vector<LinearizedStage>& blocks,
                                  const std::vector<PolyhedralSet>& cones) {
  std::vector<double> out;
  for (Index t = 0; t <= ms.h; ++t) {
    const auto& s = blocks[static_cast<std::size_t>(t)];
    const Vector g = ms.lambda0 * s.d + s.B.transpose() * ms.costate(t + 1);
    const auto gens = decompose_cone(cones[static_cast<std::size_t>(t)]);
    double v = 0.0;
    if (gens.lineality.cols() > 0) v = (gens.lineality.transpose() * g).cwiseAbs().maxCoeff();
    v = std::max(v, max_or_neg_inf(gens.rays.transpose() * g));
    out.push_back(std::max(v, 0.0));
  }
  return out;
}

}  // namespace pontryagin
