#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace pcdyn;
using namespace pcdyn::cli;

namespace {

struct RunArgs {
  std::string config;
  Overrides ov;
};

void add_run_flags(CLI::App* cmd, RunArgs& a, bool config_required = true) {
  auto* c = cmd->add_option("--config", a.config, "Scenario TOML file");
  if (config_required) c->required();
  cmd->add_option("--epsilon", a.ov.epsilon, "Override the scale parameter (drops any sweep list)");
  cmd->add_option("--model", a.ov.model, "Model name, or comma-separated list");
  cmd->add_option("--seed", a.ov.seed, "RNG seed for generated scenarios");
  cmd->add_option("--out", a.ov.out, "Output directory");
  cmd->add_option("--tol", a.ov.tol, "Stepper absolute and relative tolerance");
}

ScenarioConfig resolve(const RunArgs& a) {
  auto cfg = load_config(a.config);
  apply_overrides(cfg, a.ov);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Charged-particle effective dynamics: simulate, compare and audit"};
  app.require_subcommand(1);

  RunArgs sim, cmp, scale;
  auto* simulate = app.add_subcommand("simulate", "Run one model and write trajectory.csv and summary.json");
  add_run_flags(simulate, sim);
  auto* compare = app.add_subcommand("compare", "Run several models from shared initial data and compare them");
  add_run_flags(compare, cmp);

  auto* scaling = app.add_subcommand("scaling-study", "Fit gap-vs-epsilon power laws over an epsilon sweep");
  add_run_flags(scaling, scale, false);
  std::optional<double> synthetic;
  scaling->add_option("--synthetic", synthetic, "Self-test: fit an injected power law with this slope");

  auto* verify = app.add_subcommand("verify-algebra", "Check the algebraic identities on fixed and random cases");
  std::uint64_t verify_seed = 1;
  int trials = 100;
  std::optional<std::string> verify_out;
  verify->add_option("--seed", verify_seed, "RNG seed");
  verify->add_option("--trials", trials, "Random draws (0 runs only the fixed instances)");
  verify->add_option("--out", verify_out, "Directory for verify_algebra.json");

  auto* audit = app.add_subcommand("energy-audit", "Recompute and check energies in a trajectory CSV");
  std::string csv;
  double audit_tol = 1e-6;
  std::optional<std::string> audit_out;
  audit->add_option("csv", csv, "Trajectory CSV written by simulate")->required();
  audit->add_option("--tol", audit_tol, "Allowed relative drift of the conserved energy");
  audit->add_option("--out", audit_out, "Directory for audit.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(resolve(sim), std::cout);
    if (*compare) return cmd_compare(resolve(cmp), std::cout);
    if (*scaling) {
      if (synthetic) {
        std::vector<double> eps{1e-1, 3e-2, 1e-2, 3e-3};
        std::uint64_t seed = scale.ov.seed.value_or(1);
        std::optional<std::string> out = scale.ov.out;
        if (!scale.config.empty()) {
          const auto cfg = resolve(scale);
          if (!cfg.epsilons.empty()) eps = cfg.epsilons;
          seed = cfg.seed;
          out = cfg.out_dir;
        }
        return cmd_scaling_self_test(eps, *synthetic, seed, out, std::cout);
      }
      if (scale.config.empty()) throw Error(ErrorCode::Config, "--config is required (or use --synthetic)");
      return cmd_scaling_study(resolve(scale), std::cout);
    }
    if (*verify) return cmd_verify_algebra(verify_seed, trials, verify_out, std::cout);
    if (*audit) return cmd_energy_audit(csv, audit_tol, audit_out, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Config || e.code() == ErrorCode::InvalidArgument ||
                   e.code() == ErrorCode::CoincidentParticles
               ? kExitConfig
               : kExitSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolverFailure;
  }
  return kExitConfig;
}
