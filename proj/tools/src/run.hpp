#pragma once

#include "pontryagin/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace pontryagin::cli {

struct RunConfig {
  /// check | multipliers | sweep | verify | bound-cert | compare | export
  std::string command;
  std::string instance = "lq-stable";
  Index h = 5;
  Index h_max = 20;
  Index t_max = 0;  // 0 selects h_max / 2
  std::optional<Index> t_check;  // defaults to h
  double tol_adjoint = 1e-8;
  double tol_vi = 1e-8;
  double rank_tol = kDefaultRankTol;
  std::string out;  // empty: return the report as text only
  std::string format = "json";
  std::uint64_t seed = 42;
  /// verify: computed | oracle | zero | path to a multipliers JSON file
  std::string multipliers = "computed";
  std::string mode = "normal-first";  // normal-first | abnormal-only
  Index perturb_stage = 0;
  double perturb_size = 0.1;
  unsigned threads = 0;
};

struct RunResult {
  int exit_code = 0;    // 0 pass, 1 fail, 2 usage or schema error
  std::string output;   // the report text
  std::string message;  // diagnostics for stderr
};

RunResult run(const RunConfig& config);

}  // namespace pontryagin::cli
