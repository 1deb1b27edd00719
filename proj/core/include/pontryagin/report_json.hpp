#pragma once

#include "pontryagin/finite_horizon.hpp"
#include "pontryagin/hypotheses.hpp"
#include "pontryagin/limit_analysis.hpp"
#include "pontryagin/model.hpp"
#include "pontryagin/operator_analysis.hpp"
#include "pontryagin/verifier.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace pontryagin {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

/// Finite numbers stay numbers; +-inf and nan become the strings "inf",
/// "-inf" and "nan" so reports stay valid JSON.
Json number(double v);
Json to_json(const Vector& v);
Json to_json(const Matrix& m);

Json to_json(const Check& c);
Json to_json(const HypothesisReport& r);
Json to_json(const RangeReport& r);
Json to_json(const SurjectivityReport& r);
Json to_json(const MultiplierSet& ms);
Json to_json(const NontrivialityReport& r);
Json to_json(const BoundCertificate& c);
Json to_json(const SweepRecord& r);
Json to_json(const MultiplierBoundReport& r);
Json to_json(const SubspaceNormReport& r);
Json to_json(const DecompositionWitness& w);
Json to_json(const VerificationReport& r);
Json to_json(const ComparisonReport& r);

/// {schema_version, command, instance, verdict, report}.
Json envelope(const std::string& command, const std::string& instance, bool pass, Json report);

}  // namespace pontryagin
