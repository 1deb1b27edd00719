#include "run.hpp"

#include "pontryagin/finite_horizon.hpp"
#include "pontryagin/hypotheses.hpp"
#include "pontryagin/instances.hpp"
#include "pontryagin/limit_analysis.hpp"
#include "pontryagin/linalg.hpp"
#include "pontryagin/report_json.hpp"
#include "pontryagin/verifier.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

namespace pontryagin::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Outcome {
  bool pass = false;
  Json report;
  std::string csv;
};

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("pontryagin");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("PONTRYAGIN_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  });
}

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double max_or_zero(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : *std::max_element(xs.begin(), xs.end());
}

MultiplierOptions multiplier_options(const RunConfig& cfg) {
  MultiplierOptions mo;
  mo.mode = cfg.mode == "abnormal-only" ? MultiplierMode::abnormal_only : MultiplierMode::normal_first;
  mo.rank_tolerance = cfg.rank_tol;
  return mo;
}

void require_horizon(const InstanceBundle& b, Index h, const std::string& flag) {
  if (h < 1) throw UsageError(flag + " must be at least 1");
  if (h + 1 > b.reference.length()) {
    throw UsageError(flag + " = " + std::to_string(h) + " needs a reference of at least " +
                     std::to_string(h + 1) + " stages; '" + b.definition.name + "' has " +
                     std::to_string(b.reference.length()));
  }
}

std::vector<PolyhedralSet> cones_up_to(const InstanceBundle& b, Index last) {
  std::vector<PolyhedralSet> out;
  for (Index t = 0; t <= last; ++t) {
    out.push_back(tangent_cone(b.system.control_set(t), b.reference.control(t)));
  }
  return out;
}

std::vector<LinearizedStage> stages_up_to(const InstanceBundle& b, Index last) {
  std::vector<LinearizedStage> out;
  for (Index t = 0; t <= last; ++t) out.push_back(linearize(b.system, b.reference, t));
  return out;
}

// ---------------------------------------------------------------------------

Outcome cmd_check(const RunConfig& cfg, const InstanceBundle& b) {
  HypothesisOptions ho;
  ho.cap = cfg.h_max;
  ho.rank_tolerance = cfg.rank_tol;
  ho.stationary = b.definition.dynamics.overrides.empty();
  const HypothesisReport rep = check_hypotheses(b.system, b.reference, ho);
  const auto checks = rep.all_checks();

  Outcome out;
  out.pass = std::none_of(checks.begin(), checks.end(),
                          [](const Check& c) { return c.verdict == Verdict::fail; });
  out.report = to_json(rep);
  if (!b.definition.hypothesis_profile.empty()) {
    bool matches = true;
    Json expected = Json::object();
    for (const auto& [family, verdict] : b.definition.hypothesis_profile) {
      expected[family] = verdict;
      matches = matches && to_string(rep.aggregate(family)) == verdict;
    }
    out.report["expected_profile"] = expected;
    out.report["profile_matches"] = matches;
  }
  std::ostringstream csv;
  csv << "name,t,verdict,margin\n";
  for (const auto& c : checks) {
    csv << c.name << ',' << (c.t >= 0 ? std::to_string(c.t) : "") << ',' << to_string(c.verdict)
        << ',' << cell(c.margin) << '\n';
  }
  out.csv = csv.str();
  return out;
}

Outcome cmd_multipliers(const RunConfig& cfg, const InstanceBundle& b) {
  require_horizon(b, cfg.h, "--h");
  const TruncatedProblem problem = truncate(b.system, b.reference, cfg.h);
  const ConstraintLinearization lin = assemble_constraints(problem);
  const MultiplierSet raw = compute_multipliers(problem, lin, multiplier_options(cfg));
  const auto cones = reference_cones(problem);

  Outcome out;
  Json rep;
  rep["raw"] = to_json(raw);
  MultiplierSet judged = raw;
  try {
    judged = normalize(raw, cones[0], cones[1]);
    rep["normalized"] = to_json(judged);
  } catch (const DegenerateMultiplierError& e) {
    rep["normalized"] = nullptr;
    rep["normalization_note"] = e.what();
  }
  const auto adj = adjoint_residuals(judged, lin.blocks);
  const auto vi = vi_violations(judged, lin.blocks, cones);
  const NontrivialityReport nt =
      check_nontriviality(raw, stage_image_generators(lin.blocks[0], cones[0]),
                          stage_image_generators(lin.blocks[1], cones[1]));
  rep["adjoint_residuals"] = Json::array();
  for (double r : adj) rep["adjoint_residuals"].push_back(number(r));
  rep["vi_violations"] = Json::array();
  for (double v : vi) rep["vi_violations"].push_back(number(v));
  rep["nontriviality"] = to_json(nt);
  rep["surjectivity"] = to_json(check_closedness_surjectivity(lin, cfg.rank_tol));
  out.pass = max_or_zero(adj) <= cfg.tol_adjoint && max_or_zero(vi) <= cfg.tol_vi && nt.nontrivial;
  out.report = std::move(rep);

  std::ostringstream csv;
  csv << "t,lambda0,p_norm,adjoint_residual,vi_violation\n";
  for (Index t = 0; t <= cfg.h + 1; ++t) {
    csv << t << ',' << cell(judged.lambda0) << ','
        << (t >= 1 ? cell(judged.costate(t).norm()) : "") << ','
        << (t >= 1 && t <= cfg.h ? cell(adj[static_cast<std::size_t>(t - 1)]) : "") << ','
        << (t <= cfg.h ? cell(vi[static_cast<std::size_t>(t)]) : "") << '\n';
  }
  out.csv = csv.str();
  return out;
}

Outcome cmd_sweep(const RunConfig& cfg, const InstanceBundle& b) {
  if (cfg.h_max < 3) throw UsageError("--h-max must be at least 3");
  require_horizon(b, cfg.h_max, "--h-max");
  const Index t_max = cfg.t_max > 0 ? cfg.t_max : cfg.h_max / 2;
  if (t_max > cfg.h_max - 1) throw UsageError("--t-max must not exceed h_max - 1");

  SweepOptions so;
  so.h_max = cfg.h_max;
  so.t_max = t_max;
  so.threads = cfg.threads;
  so.multipliers = multiplier_options(cfg);
  spdlog::info("sweep over h = 2..{} on {}", cfg.h_max, b.definition.name);
  const SweepRecord rec = sweep(b.system, b.reference, so);
  for (const auto& g : rec.gaps) spdlog::warn("horizon {} skipped: {}", g.h, g.reason);

  const auto stages = stages_up_to(b, cfg.h_max);
  const auto cones = cones_up_to(b, cfg.h_max);
  const SubspaceNormReport snr = subspace_norm_convergence(rec, rec.sigma);

  // Sample pairs (z0, z1) from B_0(T_0) x B_1(T_1).
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Matrix g0 = stage_image_generators(stages[0], cones[0]);
  const Matrix g1 = stage_image_generators(stages[1], cones[1]);
  std::vector<std::pair<Vector, Vector>> samples;
  for (int k = 0; k < 8; ++k) {
    Vector w0(g0.cols()), w1(g1.cols());
    for (Index i = 0; i < w0.size(); ++i) w0(i) = unit(rng);
    for (Index i = 0; i < w1.size(); ++i) w1(i) = unit(rng);
    samples.emplace_back(g0 * w0, g1 * w1);
  }
  const MultiplierBoundReport prop = check_multiplier_bounds(rec, samples);

  Outcome out;
  out.report = Json{{"sweep", to_json(rec)},
                    {"subspace_norms", to_json(snr)},
                    {"multiplier_bounds", to_json(prop)}};
  const bool all_cauchy = std::all_of(rec.per_t.begin(), rec.per_t.end(),
                                      [](const ConvergenceSeries& s) { return s.cauchy; });
  out.pass = rec.gaps.empty() && snr.identity_holds && snr.nonvanishing && all_cauchy;

  std::ostringstream csv;
  csv << "h,t,lambda0,p_norm,adjoint_residual,vi_violation,p_diff\n";
  for (std::size_t k = 0; k < rec.multipliers.size(); ++k) {
    const MultiplierSet& ms = rec.multipliers[k];
    const Index h = ms.h;
    const std::vector<LinearizedStage> blocks(stages.begin(), stages.begin() + h + 1);
    const std::vector<PolyhedralSet> hcones(cones.begin(), cones.begin() + h + 1);
    const auto adj = adjoint_residuals(ms, blocks);
    const auto vi = vi_violations(ms, blocks, hcones);
    for (Index t = 1; t <= std::min(h, t_max); ++t) {
      std::string diff;
      if (k > 0 && rec.multipliers[k - 1].h >= t) {
        diff = cell((ms.costate(t) - rec.multipliers[k - 1].costate(t)).norm());
      }
      csv << h << ',' << t << ',' << cell(ms.lambda0) << ',' << cell(ms.costate(t).norm()) << ','
          << cell(adj[static_cast<std::size_t>(t - 1)]) << ',' << cell(vi[static_cast<std::size_t>(t)])
          << ',' << diff << '\n';
    }
  }
  out.csv = csv.str();
  return out;
}

struct SuppliedMultipliers {
  double lambda0 = 0.0;
  std::vector<Vector> p;
  std::string source;
};

SuppliedMultipliers read_multipliers_file(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) throw UsageError("--multipliers: cannot open '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("--multipliers: invalid JSON in '" + path + "': " + e.what());
  }
  // Accept a bare {lambda0, p} object or the output of the multipliers command.
  if (doc.contains("report")) {
    const Json& rep = doc["report"];
    doc = rep.contains("normalized") && !rep["normalized"].is_null() ? rep["normalized"] : rep["raw"];
  }
  if (!doc.contains("lambda0") || !doc.contains("p") || !doc["p"].is_array()) {
    throw UsageError("--multipliers: '" + path + "' needs fields lambda0 and p");
  }
  SuppliedMultipliers out;
  out.source = path;
  try {
    out.lambda0 = doc["lambda0"].get<double>();
    for (const auto& row : doc["p"]) {
      const auto values = row.get<std::vector<double>>();
      if (static_cast<Index>(values.size()) != n) throw UsageError("--multipliers: costate dimension mismatch");
      out.p.push_back(Eigen::Map<const Vector>(values.data(), n));
    }
  } catch (const Json::exception& e) {
    throw UsageError(std::string("--multipliers: ") + e.what());
  }
  return out;
}

Outcome cmd_verify(const RunConfig& cfg, const InstanceBundle& b) {
  const Index T = cfg.t_check.value_or(cfg.h);
  require_horizon(b, T, "--t-check");
  const Index n = b.system.state_dim();

  SuppliedMultipliers sup;
  if (cfg.multipliers == "computed") {
    const TruncatedProblem problem = truncate(b.system, b.reference, T);
    const ConstraintLinearization lin = assemble_constraints(problem);
    MultiplierSet ms = compute_multipliers(problem, lin, multiplier_options(cfg));
    const auto cones = reference_cones(problem);
    try {
      ms = normalize(ms, cones[0], cones[1]);
    } catch (const DegenerateMultiplierError&) {
      spdlog::warn("multipliers could not be normalized; verifying the raw set");
    }
    sup = {ms.lambda0, ms.p, "computed"};
  } else if (cfg.multipliers == "oracle") {
    sup = {1.0, riccati_oracle(b, T), "oracle"};
  } else if (cfg.multipliers == "zero") {
    sup = {0.0, std::vector<Vector>(static_cast<std::size_t>(T + 1), Vector::Zero(n)), "zero"};
  } else {
    sup = read_multipliers_file(cfg.multipliers, n);
  }
  if (static_cast<Index>(sup.p.size()) < T + 1) {
    throw UsageError("--multipliers: need costates p_1..p_" + std::to_string(T + 1));
  }

  VerifyOptions vo;
  vo.tol_adjoint = cfg.tol_adjoint;
  vo.tol_vi = cfg.tol_vi;
  const VerificationReport rep = verify(b.system, b.reference, sup.lambda0, sup.p, T, vo);

  Outcome out;
  out.pass = rep.overall;
  out.report = to_json(rep);
  out.report["multipliers_source"] = sup.source;
  out.report["lambda0"] = number(sup.lambda0);
  std::ostringstream csv;
  csv << "t,adjoint_residual,vi_violation\n";
  for (Index t = 0; t <= T; ++t) {
    csv << t << ',' << (t >= 1 ? cell(rep.cond3_residuals[static_cast<std::size_t>(t - 1)]) : "")
        << ',' << cell(rep.cond4_violations[static_cast<std::size_t>(t)]) << '\n';
  }
  out.csv = csv.str();
  return out;
}

Outcome cmd_bound_cert(const RunConfig& cfg, const InstanceBundle& b) {
  require_horizon(b, cfg.h, "--h");
  const TruncatedProblem problem = truncate(b.system, b.reference, cfg.h);
  const ConstraintLinearization lin = assemble_constraints(problem);
  BoundOptions bo;
  bo.seed = cfg.seed;
  bo.rank_tolerance = cfg.rank_tol;

  Outcome out;
  out.report["surjectivity"] = to_json(check_closedness_surjectivity(lin, cfg.rank_tol));
  std::ostringstream csv;
  csv << "sample,ratio,residual,ok\n";
  try {
    const BoundCertificate cert = preimage_bound(lin, bo);
    out.pass = cert.all_passed;
    out.report["certificate"] = to_json(cert);
    for (std::size_t k = 0; k < cert.samples.size(); ++k) {
      const auto& s = cert.samples[k];
      csv << k << ',' << cell(s.ratio) << ',' << cell(s.residual) << ',' << (s.ok ? "true" : "false")
          << '\n';
    }
  } catch (const HypothesisError& e) {
    out.pass = false;
    out.report["certificate"] = nullptr;
    out.report["note"] = e.what();
  }
  out.csv = csv.str();
  return out;
}

/// Perturbs u_s, then steers back onto the reference within the fewest
/// stages a Newton solve allows, and follows the reference afterwards.
struct Challenger {
  Process process;
  Index return_stages = 0;
  double perturbation = 0.0;
};

Challenger build_challenger(const InstanceBundle& b, Index s, double size, Index last_stage) {
  const ControlSystem& sys = b.system;
  const Process& ref = b.reference;
  const Index n = sys.state_dim();
  const Index m = sys.control_dim();

  Vector u_s = ref.control(s);
  double applied = size;
  Vector bumped = u_s;
  bumped(0) += size;
  if (!sys.control_set(s).contains(bumped)) {
    bumped(0) = u_s(0) - size;
    applied = -size;
    if (!sys.control_set(s).contains(bumped)) {
      throw Error("compare: neither sign of the perturbation keeps u_s in U_s");
    }
  }
  const Vector x_next = sys.step(s, ref.state(s), bumped);

  // Only coordinates with slack in U_t move during the return.
  auto free_mask = [&](Index t) {
    Vector mask = Vector::Zero(m);
    const PolyhedralSet set = sys.control_set(t);
    for (Index i = 0; i < m; ++i) {
      Vector lo = ref.control(t), hi = ref.control(t);
      lo(i) -= 1e-6;
      hi(i) += 1e-6;
      if (set.contains(lo) && set.contains(hi)) mask(i) = 1.0;
    }
    return mask;
  };

  for (Index r = 1; r <= n + 6 && s + r + 1 <= last_stage; ++r) {
    const Vector& target = ref.state(s + r + 1);
    Vector w(r * m);
    Vector mask(r * m);
    for (Index j = 0; j < r; ++j) {
      w.segment(j * m, m) = ref.control(s + 1 + j);
      mask.segment(j * m, m) = free_mask(s + 1 + j);
    }
    if (mask.sum() < 1.0) continue;
    auto rollout = [&](const Vector& ws, std::vector<Vector>& xs) {
      xs.assign(1, x_next);
      for (Index j = 0; j < r; ++j) xs.push_back(sys.step(s + 1 + j, xs.back(), ws.segment(j * m, m)));
    };
    std::vector<Vector> xs;
    bool ok = false;
    try {
      for (int iter = 0; iter < 50; ++iter) {
        rollout(w, xs);
        const Vector residual = xs.back() - target;
        if (residual.norm() <= 1e-11 * (1.0 + target.norm())) {
          ok = true;
          break;
        }
        // d x_end / d u_{s+1+j} = A_{s+r} .. A_{s+2+j} B_{s+1+j}
        Matrix jac(n, r * m);
        Matrix carry = Matrix::Identity(n, n);
        for (Index j = r - 1; j >= 0; --j) {
          const auto st = linearize_at(sys, s + 1 + j, xs[static_cast<std::size_t>(j)], w.segment(j * m, m));
          jac.middleCols(j * m, m) = carry * st.B;
          carry = carry * st.A;
        }
        jac = jac * mask.asDiagonal();
        w -= mask.asDiagonal() * jac.completeOrthogonalDecomposition().solve(residual);
      }
    } catch (const Error& e) {
      spdlog::debug("compare: return over {} stages failed: {}", r, e.what());
      ok = false;
    }
    if (!ok) continue;
    bool feasible = true;
    for (Index j = 0; j < r; ++j) {
      feasible = feasible && sys.control_set(s + 1 + j).contains(w.segment(j * m, m));
      feasible = feasible && sys.state_domain(s + 1 + j).contains(xs[static_cast<std::size_t>(j)]);
    }
    if (!feasible) continue;

    std::vector<Vector> states(ref.states().begin(), ref.states().begin() + s + 1);
    std::vector<Vector> controls(ref.controls().begin(), ref.controls().begin() + s);
    controls.push_back(bumped);
    for (Index j = 0; j < r; ++j) {
      states.push_back(xs[static_cast<std::size_t>(j)]);
      controls.push_back(w.segment(j * m, m));
    }
    for (Index t = s + r + 1; t <= last_stage; ++t) {
      states.push_back(ref.state(t));
      controls.push_back(ref.control(t));
    }
    states.push_back(ref.state(last_stage + 1));
    return {Process(ref.initial_state(), std::move(states), std::move(controls)), r, applied};
  }
  throw Error("compare: no feasible return to the reference after perturbing stage " + std::to_string(s));
}

Outcome cmd_compare(const RunConfig& cfg, const InstanceBundle& b) {
  const Index cap = std::min(cfg.h_max, b.reference.length() - 1);
  if (cfg.perturb_stage + 3 > cap) throw UsageError("--perturb-stage leaves no room before --h-max");
  if (!(cfg.perturb_size > 0.0)) throw UsageError("--perturb-size must be positive");
  const Challenger ch = build_challenger(b, cfg.perturb_stage, cfg.perturb_size, cap);
  const ComparisonReport rep = compare_processes(b.system, b.reference.prefix(cap + 1), ch.process, cap);

  Outcome out;
  out.pass = rep.dominates_limsup;
  out.report = to_json(rep);
  out.report["challenger"] = Json{{"perturb_stage", cfg.perturb_stage},
                                  {"perturbation", number(ch.perturbation)},
                                  {"return_stages", ch.return_stages}};
  std::ostringstream csv;
  csv << "h,delta\n";
  for (std::size_t h = 0; h < rep.deltas.size(); ++h) csv << h << ',' << cell(rep.deltas[h]) << '\n';
  out.csv = csv.str();
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("--out: cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw UsageError("--out: write to '" + path + "' failed");
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  configure_logging();
  RunResult result;
  static const std::vector<std::string> commands{"check",      "multipliers", "sweep", "verify",
                                                 "bound-cert", "compare",     "export"};
  try {
    if (std::find(commands.begin(), commands.end(), cfg.command) == commands.end()) {
      throw UsageError("unknown command '" + cfg.command + "'");
    }
    if (cfg.format != "json" && cfg.format != "csv") {
      throw UsageError("--format must be json or csv");
    }
    if (!(cfg.tol_adjoint > 0.0) || !(cfg.tol_vi > 0.0) || !(cfg.rank_tol > 0.0)) {
      throw UsageError("tolerances must be positive");
    }
    if (cfg.mode != "normal-first" && cfg.mode != "abnormal-only") {
      throw UsageError("--mode must be normal-first or abnormal-only");
    }
    const InstanceBundle bundle = resolve_instance(cfg.instance);
    spdlog::debug("{} on {}", cfg.command, bundle.definition.name);

    if (cfg.command == "export") {
      result.output = to_yaml(bundle.definition);
    } else {
      Outcome outcome;
      try {
        if (cfg.command == "check") outcome = cmd_check(cfg, bundle);
        else if (cfg.command == "multipliers") outcome = cmd_multipliers(cfg, bundle);
        else if (cfg.command == "sweep") outcome = cmd_sweep(cfg, bundle);
        else if (cfg.command == "verify") outcome = cmd_verify(cfg, bundle);
        else if (cfg.command == "bound-cert") outcome = cmd_bound_cert(cfg, bundle);
        else outcome = cmd_compare(cfg, bundle);
      } catch (const UsageError&) {
        throw;
      } catch (const Error& e) {
        // Computation failed on valid input: a fail verdict with the reason.
        outcome.pass = false;
        outcome.report = Json{{"error", e.what()}};
        outcome.csv = std::string("error\n") + e.what() + "\n";
        result.message = e.what();
      }
      result.exit_code = outcome.pass ? 0 : 1;
      result.output = cfg.format == "csv"
                          ? outcome.csv
                          : envelope(cfg.command, cfg.instance, outcome.pass, std::move(outcome.report))
                                    .dump(2) + "\n";
    }
    if (!cfg.out.empty()) write_file(cfg.out, result.output);
  } catch (const UsageError& e) {
    return {2, "", std::string("usage error: ") + e.what()};
  } catch (const SchemaError& e) {
    return {2, "", e.what()};
  } catch (const UnknownInstanceError& e) {
    std::string names;
    for (const auto& n : builtin_names()) names += (names.empty() ? "" : ", ") + n;
    return {2, "", std::string(e.what()) + " (builtins: " + names + ")"};
  } catch (const Error& e) {
    return {2, "", e.what()};
  }
  return result;
}

}  // namespace pontryagin::cli
