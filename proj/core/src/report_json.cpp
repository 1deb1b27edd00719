#include "pontryagin/report_json.hpp"

#include <cmath>

namespace pontryagin {
namespace {

template <typename T, typename F>
Json array_of(const std::vector<T>& items, F&& f) {
  Json out = Json::array();
  for (const auto& item : items) out.push_back(f(item));
  return out;
}

Json numbers(const std::vector<double>& xs) {
  return array_of(xs, [](double x) { return number(x); });
}

Json vectors(const std::vector<Vector>& xs) {
  return array_of(xs, [](const Vector& v) { return to_json(v); });
}

}  // namespace

Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

Json to_json(const Check& c) {
  Json out{{"name", c.name}, {"verdict", to_string(c.verdict)}, {"margin", number(c.margin)}};
  if (c.t >= 0) out["t"] = c.t;
  if (!c.note.empty()) out["note"] = c.note;
  return out;
}

Json to_json(const HypothesisReport& r) {
  Json families = Json::object();
  for (const char* name : {"H1", "H2", "H3", "H4", "H5", "H6", "closed_image", "range_sum", "stage_onto", "initial_onto"}) {
    families[name] = to_string(r.aggregate(name));
  }
  return Json{{"cap", r.cap},
              {"stationary", r.stationary},
              {"families", families},
              {"checks", array_of(r.all_checks(), [](const Check& c) { return to_json(c); })}};
}

Json to_json(const RangeReport& r) {
  return Json{{"rows", r.rows},
              {"cols", r.cols},
              {"numerical_rank", r.numerical_rank},
              {"rank_tolerance", number(r.rank_tolerance)},
              {"smallest_positive_singular_value", number(r.smallest_positive_singular_value)},
              {"surjective", r.surjective},
              {"singular_values", to_json(r.singular_values)}};
}

Json to_json(const SurjectivityReport& r) {
  return Json{{"closed_range", r.closed_range},
              {"surjective", r.surjective},
              {"rank", r.rank},
              {"rows", r.rows},
              {"margin", number(r.margin)}};
}

Json to_json(const MultiplierSet& ms) {
  return Json{{"h", ms.h},
              {"lambda0", number(ms.lambda0)},
              {"normalized", ms.normalized},
              {"p", vectors(ms.p)},
              {"q1", to_json(ms.q1)},
              {"q2", to_json(ms.q2)}};
}

Json to_json(const NontrivialityReport& r) {
  return Json{{"lambda0", number(r.lambda0)},
              {"p1_restricted", number(r.p1_restricted)},
              {"p2_restricted", number(r.p2_restricted)},
              {"margin", number(r.margin)},
              {"nontrivial", r.nontrivial}};
}

Json to_json(const BoundCertificate& c) {
  return Json{{"h", c.h},
              {"constants", numbers(c.constants)},
              {"a_h", number(c.constants.empty() ? 0.0 : c.a_h())},
              {"forward_b", numbers(c.forward_b)},
              {"c", number(c.c)},
              {"c1", number(c.c1)},
              {"c2", number(c.c2)},
              {"samples", array_of(c.samples,
                                   [](const BoundSample& s) {
                                     return Json{{"ratio", number(s.ratio)},
                                                 {"residual", number(s.residual)},
                                                 {"ok", s.ok}};
                                   })},
              {"all_passed", c.all_passed}};
}

Json to_json(const SweepRecord& r) {
  Json series = array_of(r.per_t, [](const ConvergenceSeries& s) {
    return Json{{"t", s.t},
                {"diffs", numbers(s.diffs)},
                {"cauchy", s.cauchy},
                {"eventually_monotone", s.eventually_monotone}};
  });
  return Json{{"horizons", r.horizons},
              {"t_max", r.t_max},
              {"lambda0", array_of(r.multipliers, [](const MultiplierSet& m) { return number(m.lambda0); })},
              {"gaps", array_of(r.gaps,
                                [](const HorizonGap& g) { return Json{{"h", g.h}, {"reason", g.reason}}; })},
              {"per_t", series},
              {"limit_lambda0", number(r.limit_lambda0)},
              {"limit_p", vectors(r.limit_p)},
              {"nontriviality_margin", number(r.nontriviality_margin)},
              {"costate_margin", number(r.costate_margin)}};
}

Json to_json(const MultiplierBoundReport& r) {
  return Json{{"applicable", r.applicable},
              {"note", r.note},
              {"sup_ratio", numbers(r.sup_ratio)},
              {"bounded", r.bounded}};
}

Json to_json(const SubspaceNormReport& r) {
  return Json{{"restricted_norms", numbers(r.restricted_norms)},
              {"identity_errors", numbers(r.identity_errors)},
              {"identity_holds", r.identity_holds},
              {"nonvanishing", r.nonvanishing}};
}

Json to_json(const DecompositionWitness& w) {
  return Json{{"v", to_json(w.v)},
              {"zeta0", to_json(w.zeta0)},
              {"zeta1", to_json(w.zeta1)},
              {"residual", number(w.residual)},
              {"feasible", w.feasible}};
}

Json to_json(const VerificationReport& r) {
  return Json{{"t_check", r.t_check},
              {"scale", number(r.scale)},
              {"cond1", {{"pass", r.cond1_nontrivial}, {"margin", number(r.cond1_margin)}}},
              {"cond2", {{"pass", r.cond2_sign}}},
              {"cond3", {{"pass", r.cond3_pass}, {"residuals", numbers(r.cond3_residuals)}}},
              {"cond4",
               {{"pass", r.cond4_pass},
                {"violations", numbers(r.cond4_violations)},
                {"rays", vectors(r.cond4_rays)}}},
              {"overall", r.overall},
              {"first_failure", r.first_failure},
              {"note", r.note}};
}

Json to_json(const ComparisonReport& r) {
  return Json{{"deltas", numbers(r.deltas)},
              {"limsup_estimate", number(r.limsup_estimate)},
              {"liminf_estimate", number(r.liminf_estimate)},
              {"dominates_limsup", r.dominates_limsup},
              {"dominates_liminf", r.dominates_liminf}};
}

Json envelope(const std::string& command, const std::string& instance, bool pass, Json report) {
  return Json{{"schema_version", kReportSchemaVersion},
              {"command", command},
              {"instance", instance},
              {"verdict", pass ? "pass" : "fail"},
              {"report", std::move(report)}};
}

}  // namespace pontryagin
