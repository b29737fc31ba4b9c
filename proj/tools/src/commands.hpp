#pragma once

#include "config.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace pcdyn::cli {

/// Process exit codes. Each termination reason has exactly one code.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitCollision = 2,
  kExitEscape = 3,
  kExitSolverFailure = 4,
  kExitRunaway = 5,
  kExitCheckFailed = 6,
};

int exit_code(Termination t);

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<double> epsilon;
  std::optional<std::string> model;  // one name, or a comma-separated list
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;         // stepper abs_tol and rel_tol
};

void apply_overrides(ScenarioConfig& cfg, const Overrides& ov);

/// Worker count: PCDYN_THREADS if set, else hardware concurrency, never above `jobs`.
unsigned worker_count(std::size_t jobs);
/// Runs fn(0..jobs-1) on the pool; results must be stored by index.
void run_parallel(std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Runs one model; the third-order model starts on the slow manifold.
Trajectory run_model(Model model, const Scenario& sc, const ScenarioConfig& cfg, double eps);

/// Each command writes its files under cfg.out_dir, prints a human summary
/// to `log`, and returns an ExitCode.
int cmd_simulate(const ScenarioConfig& cfg, std::ostream& log);
int cmd_compare(const ScenarioConfig& cfg, std::ostream& log);
int cmd_scaling_study(const ScenarioConfig& cfg, std::ostream& log);
/// Fits a known power law y = C eps^slope (with small seeded noise) to check the fitting path.
int cmd_scaling_self_test(const std::vector<double>& eps, double slope, std::uint64_t seed,
                          const std::optional<std::string>& out_dir, std::ostream& log);
/// trials = 0 runs only the fixed instances.
int cmd_verify_algebra(std::uint64_t seed, int trials, const std::optional<std::string>& out_dir, std::ostream& log);
/// Recomputes energies from the state columns of a trajectory CSV and checks them.
int cmd_energy_audit(const std::string& csv_path, double tol, const std::optional<std::string>& out_dir,
                     std::ostream& log);

}  // namespace pcdyn::cli
