#include "run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using pontryagin::cli::RunConfig;
  RunConfig cfg;
  CLI::App app{"Checks discrete-time maximum-principle conditions on finite truncations."};
  app.set_help_flag("--help", "print this help and exit");  // -h would shadow --h
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--instance", cfg.instance, "builtin name or problem file");
    sub->add_option("--out", cfg.out, "write the report to this path");
    sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--rank-tol", cfg.rank_tol, "relative rank tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "seed for randomized sample checks");
  };
  auto add_h = [&](CLI::App* sub) {
    sub->add_option("--h", cfg.h, "truncation horizon")->check(CLI::Range(1, 1000));
  };
  auto add_tols = [&](CLI::App* sub) {
    sub->add_option("--tol-adjoint", cfg.tol_adjoint, "adjoint residual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol-vi", cfg.tol_vi, "variational inequality tolerance")->check(CLI::PositiveNumber);
  };
  auto add_mode = [&](CLI::App* sub) {
    sub->add_option("--mode", cfg.mode, "multiplier branch")
        ->check(CLI::IsMember({"normal-first", "abnormal-only"}));
  };

  auto* check = app.add_subcommand("check", "hypothesis checks at the reference");
  add_common(check);
  check->add_option("--h-max", cfg.h_max, "last stage examined")->check(CLI::Range(1, 1000));

  auto* mult = app.add_subcommand("multipliers", "multipliers of the horizon-h truncation");
  add_common(mult);
  add_h(mult);
  add_tols(mult);
  add_mode(mult);

  auto* sw = app.add_subcommand("sweep", "normalized multipliers for h = 2..h_max");
  add_common(sw);
  add_tols(sw);
  add_mode(sw);
  sw->add_option("--h-max", cfg.h_max, "largest horizon")->check(CLI::Range(3, 1000));
  sw->add_option("--t-max", cfg.t_max, "largest stage tracked (0: h_max / 2)")->check(CLI::Range(0, 1000));
  sw->add_option("--threads", cfg.threads, "worker threads (0: hardware)");

  auto* ver = app.add_subcommand("verify", "the four first-order conditions at depth T");
  add_common(ver);
  add_h(ver);
  add_tols(ver);
  add_mode(ver);
  ver->add_option("--t-check", cfg.t_check, "verification depth (default: h)")->check(CLI::Range(1, 1000));
  ver->add_option("--multipliers", cfg.multipliers, "computed, oracle, zero, or a multipliers JSON file");

  auto* cert = app.add_subcommand("bound-cert", "preimage bound certificate for Dg^h");
  add_common(cert);
  add_h(cert);

  auto* cmp = app.add_subcommand("compare", "reference against a perturbed feasible process");
  add_common(cmp);
  cmp->add_option("--h-max", cfg.h_max, "last partial sum compared")->check(CLI::Range(1, 1000));
  cmp->add_option("--perturb-stage", cfg.perturb_stage, "stage whose control is perturbed")
      ->check(CLI::Range(0, 1000));
  cmp->add_option("--perturb-size", cfg.perturb_size, "size of the control perturbation");

  auto* exp = app.add_subcommand("export", "write an instance as a problem file");
  add_common(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  const auto result = pontryagin::cli::run(cfg);
  if (!result.message.empty()) std::cerr << result.message << "\n";
  if (cfg.out.empty()) std::cout << result.output;
  return result.exit_code;
}
