#include "pontryagin/limit_analysis.hpp"

#include "pontryagin/linalg.hpp"
#include "pontryagin/lp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <thread>

namespace pontryagin {
namespace {

Index tail_count(std::size_t size, Index minimum) {
  const auto quarter = static_cast<Index>(std::ceil(0.25 * static_cast<double>(size)));
  return std::min(static_cast<Index>(size), std::max(minimum, quarter));
}

Vector stacked_q(const MultiplierSet& ms) {
  Vector q(ms.q1.size() + ms.q2.size());
  q << ms.q1, ms.q2;
  return q;
}

}  // namespace

Matrix sigma_basis(const PolyhedralSet& cone0, const PolyhedralSet& cone1) {
  const Matrix s0 = decompose_cone(cone0).span_basis();
  const Matrix s1 = decompose_cone(cone1).span_basis();
  Matrix out = Matrix::Zero(cone0.dim() + cone1.dim(), s0.cols() + s1.cols());
  out.topLeftCorner(cone0.dim(), s0.cols()) = s0;
  out.bottomRightCorner(cone1.dim(), s1.cols()) = s1;
  return out;
}

double restricted_norm(const MultiplierSet& ms, const Matrix& sigma) {
  if (sigma.cols() == 0) return 0.0;
  return (sigma.transpose() * stacked_q(ms)).norm();
}

MultiplierSet normalize(const MultiplierSet& ms, const PolyhedralSet& cone0,
                        const PolyhedralSet& cone1) {
  const double theta = ms.lambda0 + restricted_norm(ms, sigma_basis(cone0, cone1));
  if (!(theta > 1e-12)) {
    throw DegenerateMultiplierError("normalize: lambda0 and the restricted (q1, q2) vanish");
  }
  MultiplierSet out = ms;
  out.lambda0 /= theta;
  for (auto& p : out.p) p /= theta;
  out.q1 /= theta;
  out.q2 /= theta;
  out.normalized = true;
  return out;
}

SweepRecord sweep(const ControlSystem& system, const Process& reference,
                  const SweepOptions& options) {
  if (options.h_max < 3) throw DimensionError("sweep: h_max must be at least 3");
  const Index t_max = options.t_max > 0 ? options.t_max : options.h_max / 2;
  if (t_max > options.h_max - 1) throw DimensionError("sweep: t_max must not exceed h_max - 1");

  const PolyhedralSet cone0 = tangent_cone(system.control_set(0), reference.control(0));
  const PolyhedralSet cone1 = tangent_cone(system.control_set(1), reference.control(1));

  const Index count = options.h_max - 1;  // h = 2..h_max
  std::vector<std::optional<MultiplierSet>> results(static_cast<std::size_t>(count));
  std::vector<std::string> errors(static_cast<std::size_t>(count));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index k = next++; k < count; k = next++) {
      const Index h = k + 2;
      try {
        const TruncatedProblem problem = truncate(system, reference, h);
        const ConstraintLinearization lin = assemble_constraints(problem, options.linearize);
        const MultiplierSet raw = compute_multipliers(problem, lin, options.multipliers);
        results[static_cast<std::size_t>(k)] = normalize(raw, cone0, cone1);
      } catch (const Error& e) {
        errors[static_cast<std::size_t>(k)] = e.what();
      }
    }
  };
  unsigned threads = options.threads > 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(count));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  SweepRecord rec;
  rec.t_max = t_max;
  rec.sigma = sigma_basis(cone0, cone1);
  for (Index k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    if (results[idx]) {
      rec.horizons.push_back(k + 2);
      rec.multipliers.push_back(std::move(*results[idx]));
    } else {
      rec.gaps.push_back({k + 2, errors[idx]});
    }
  }

  for (Index t = 1; t <= t_max; ++t) {
    ConvergenceSeries series;
    series.t = t;
    // p_t^h is compared only where t <= h.
    for (std::size_t k = 0; k + 1 < rec.multipliers.size(); ++k) {
      if (rec.multipliers[k].h < t) continue;
      series.diffs.push_back((rec.multipliers[k + 1].costate(t) - rec.multipliers[k].costate(t)).norm());
    }
    if (!series.diffs.empty()) {
      const Index tail = tail_count(series.diffs.size(), 1);
      series.cauchy = std::all_of(series.diffs.end() - tail, series.diffs.end(),
                                  [&](double d) { return d <= options.cauchy_tolerance; });
      const Index mono = tail_count(series.diffs.size(), 2);
      series.eventually_monotone = true;
      for (auto it = series.diffs.end() - mono; it + 1 != series.diffs.end(); ++it) {
        if (*(it + 1) > *it + options.monotone_floor) series.eventually_monotone = false;
      }
    }
    rec.per_t.push_back(std::move(series));
  }

  if (!rec.multipliers.empty()) {
    const MultiplierSet& last = rec.multipliers.back();
    rec.limit_lambda0 = last.lambda0;
    for (Index t = 1; t <= std::min(t_max, last.h + 1); ++t) rec.limit_p.push_back(last.costate(t));
    rec.nontriviality_margin = last.lambda0 + restricted_norm(last, rec.sigma);
    rec.costate_margin = last.lambda0 + last.costate(1).norm() + last.costate(2).norm();
  }
  return rec;
}

MultiplierBoundReport check_multiplier_bounds(const SweepRecord& record,
                             const std::vector<std::pair<Vector, Vector>>& samples) {
  MultiplierBoundReport out;
  for (const auto& ms : record.multipliers) {
    if (!(ms.lambda0 > 0.0)) {
      out.note = "abnormal branch, bound not applicable (lambda0 = 0 at h = " +
                 std::to_string(ms.h) + ")";
      return out;
    }
  }
  if (record.multipliers.empty()) {
    out.note = "no horizons available";
    return out;
  }
  out.applicable = true;
  out.bounded = true;
  for (const auto& [z0, z1] : samples) {
    std::vector<double> row;
    double sup = -kInfinity;
    for (const auto& ms : record.multipliers) {
      const double r = (ms.costate(1).dot(z0) + ms.costate(2).dot(z1)) / ms.lambda0;
      row.push_back(r);
      sup = std::max(sup, r);
    }
    out.bounded = out.bounded && std::isfinite(sup);
    out.sup_ratio.push_back(sup);
    out.ratios.push_back(std::move(row));
  }
  out.note = "empirical sup over the materialized horizons";
  return out;
}

DecompositionWitness decompose_v(const Vector& v, const LinearizedStage& stage0,
                                 const LinearizedStage& stage1, const PolyhedralSet& cone0,
                                 const PolyhedralSet& cone1, double tol) {
  const Index n = stage1.A.rows();
  if (v.size() != n) throw DimensionError("decompose_v: v has wrong dimension");
  const auto g0 = decompose_cone(cone0);
  const auto g1 = decompose_cone(cone1);
  const Matrix ab = stage1.A * stage0.B;
  const Index l0 = g0.lineality.cols(), l1 = g1.lineality.cols();
  const Index r0 = g0.rays.cols(), r1 = g1.rays.cols();

  // Columns: free lineality weights first, then nonnegative ray weights.
  Matrix cols(n, l0 + l1 + r0 + r1);
  if (l0 > 0) cols.middleCols(0, l0) = ab * g0.lineality;
  if (l1 > 0) cols.middleCols(l0, l1) = stage1.B * g1.lineality;
  if (r0 > 0) cols.middleCols(l0 + l1, r0) = ab * g0.rays;
  if (r1 > 0) cols.middleCols(l0 + l1 + r0, r1) = stage1.B * g1.rays;
  const Vector w = lp::mixed_nnls(cols, v, l0 + l1);

  DecompositionWitness out;
  out.v = v;
  out.zeta0 = Vector::Zero(cone0.dim());
  out.zeta1 = Vector::Zero(cone1.dim());
  if (l0 > 0) out.zeta0 += g0.lineality * w.segment(0, l0);
  if (l1 > 0) out.zeta1 += g1.lineality * w.segment(l0, l1);
  if (r0 > 0) out.zeta0 += g0.rays * w.segment(l0 + l1, r0).cwiseMax(0.0);
  if (r1 > 0) out.zeta1 += g1.rays * w.segment(l0 + l1 + r0, r1).cwiseMax(0.0);
  out.z0 = stage0.B * out.zeta0;
  out.z1 = stage1.B * out.zeta1;
  out.residual = (v - stage1.A * out.z0 - out.z1).norm();
  out.feasible = out.residual <= tol;
  return out;
}

SubspaceNormReport subspace_norm_convergence(const SweepRecord& record, const Matrix& sigma,
                                             double tol) {
  SubspaceNormReport out;
  out.identity_holds = !record.multipliers.empty();
  out.nonvanishing = !record.multipliers.empty();
  for (const auto& ms : record.multipliers) {
    const double r = restricted_norm(ms, sigma);
    out.restricted_norms.push_back(r);
    const double err = std::abs(ms.lambda0 + r - 1.0);
    out.identity_errors.push_back(err);
    out.identity_holds = out.identity_holds && err <= tol;
    out.nonvanishing = out.nonvanishing && ms.lambda0 + r > 0.5;
  }
  return out;
}

}  // namespace pontryagin
