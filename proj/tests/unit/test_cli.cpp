#include "doctest.h"

#include "commands.hpp"
#include "config.hpp"
#include "output.hpp"

#include <unistd.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace pcdyn;
using namespace pcdyn::cli;
namespace fs = std::filesystem;

namespace {

const char* kPair = R"(
[scenario]
epsilon = 0.01
models = ["coulomb"]
t_end = 1.0
seed = 7

[[particle]]
charge = 1.0
mass = 1.0
position = [0.6666666666666666, 0.0, 0.0]
velocity = [0.0, 0.16666666666666666, 0.0]

[[particle]]
charge = -1.0
mass = 2.0
position = [-0.3333333333333333, 0.0, 0.0]
velocity = [0.0, -0.08333333333333333, 0.0]

[stepper]
sample_interval = 0.05
)";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("pcdyn_test_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

int run_exe(const std::string& args) {
  const std::string cmd = std::string(PCDYN_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const std::string& text) {
  try {
    build_scenario(parse_config(text, "t.toml"));
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::Config);
    return err.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(kPair);
  REQUIRE(cfg.particles.size() == 2);
  CHECK(cfg.particles[1].charge == -1.0);
  CHECK(*cfg.particles[1].star_mass == 2.0);
  CHECK(cfg.models == std::vector<Model>{Model::Coulomb});
  CHECK(cfg.seed == 7);
  CHECK(cfg.stepper.sample_interval == 0.05);
  CHECK(!cfg.guard.has_value());

  const auto sc = build_scenario(cfg);
  CHECK(sc.system.masses == std::vector<double>{1.0, 2.0});
  CHECK(sc.regularization.c_lower == doctest::Approx(0.5));
  CHECK(sc.guard.min_separation == doctest::Approx(0.125));

  SUBCASE("bare masses pick up the electromagnetic mass") {
    const auto bare = parse_config("[[particle]]\ncharge = 2.0\nbare_mass = 1.0\nposition = [0, 0, 0]\n");
    const auto s = build_scenario(bare);
    const double me = electromagnetic_mass(make_form_factor(1.0));
    CHECK(s.system.masses[0] == doctest::Approx(1.0 + 4.0 / 3.0 * 4.0 * me));
    CHECK(s.system.star_masses[0] == doctest::Approx(1.0 + 16.0 / 15.0 * 4.0 * me));
  }

  SUBCASE("generated scenarios depend only on the seed") {
    const std::string text = "[scenario]\nseed = 11\n[generate]\ncount = 4\n";
    const auto a = build_scenario(parse_config(text));
    const auto b = build_scenario(parse_config(text));
    CHECK(a.system.charges == b.system.charges);
    CHECK(a.initial.r == b.initial.r);
    CHECK(a.initial.u == b.initial.u);
    const auto c = build_scenario(parse_config("[scenario]\nseed = 12\n[generate]\ncount = 4\n"));
    CHECK(c.initial.r != a.initial.r);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < i; ++j) CHECK((a.initial.r.segment<3>(3 * i) - a.initial.r.segment<3>(3 * j)).norm() >= 0.5);
    }
  }
}

TEST_CASE("config errors carry line and field") {
  CHECK(config_error("[scenario]\nepsilon = \"x\"\n").find("t.toml:2: scenario.epsilon") != std::string::npos);
  CHECK(config_error("[scenario]\nepsilon = 0.1\nfoo = 1\n").find("t.toml:3: scenario.foo: unknown key") !=
        std::string::npos);
  CHECK(config_error("[scenario\n").find("t.toml:1: syntax") != std::string::npos);
  CHECK(config_error("[nope]\n").find("unknown section") != std::string::npos);
  CHECK(config_error("[[particle]]\ncharge = 1.0\nmass = 1.0\nposition = [0, 0]\n").find("particle[0].position") !=
        std::string::npos);
  CHECK(config_error("[scenario]\nepsilon = 0.1\n").find("no particles") != std::string::npos);
  CHECK(config_error("[scenario]\nmodels = [\"maxwell\"]\n").find("scenario.models") != std::string::npos);

  const std::string one = "[[particle]]\ncharge = 1.0\nmass = 1.0\nposition = [0, 0, 0]\n";
  CHECK(config_error("[scenario]\nepsilon = 1.5\n" + one).find("t.toml:2: scenario.epsilon: must lie in (0, 1]") !=
        std::string::npos);
  CHECK(config_error("[scenario]\nepsilon = 0.0\n" + one).find("scenario.epsilon") != std::string::npos);
  CHECK(config_error(one + "bare_mass = 1.0\n").find("either bare_mass or mass") != std::string::npos);
  CHECK(config_error("[stepper]\nabs_tol = -1.0\n" + one).find("t.toml:1: stepper") != std::string::npos);
}

TEST_CASE("coincident particles are rejected with a field-level error") {
  std::string text = kPair;
  const std::string second = "position = [-0.3333333333333333, 0.0, 0.0]";
  text.replace(text.find(second), second.size(), "position = [0.6666666666666666, 0.0, 0.0]");
  const auto msg = config_error(text);
  CHECK(msg.find("particle[1].position: coincides with particle[0]") != std::string::npos);
  CHECK(msg.find("t.toml:17:") == 0);
}

TEST_CASE("config round trip") {
  auto check = [](const std::string& text) {
    const auto a = parse_config(text);
    const auto b = parse_config(serialize_config(a));
    CHECK(a == b);
    CHECK(serialize_config(b) == serialize_config(a));
  };
  check(kPair);
  check("[scenario]\nseed = 18446744073709551\nepsilons = [0.1, 0.03, 0.01]\nmodels = [\"third_order\", "
        "\"rr_reduced\"]\n[generate]\ncount = 3\nspeed = 0.1\n[manifold]\nshooting_iterations = 2\n");
  check(std::string(kPair) + "[regularization]\nc_v = 0.5\nc_lower = 0.25\nc_upper = 3.0\nenabled = false\n"
                             "[guard]\nmin_separation = 0.1\nescape_radius = inf\n[form_factor]\nsharpness = 2.5\n");
  check("[[particle]]\ncharge = 0.1\nbare_mass = 0.3\nposition = [1e-300, 0.1, 0.7]\nvelocity = [0.2, 0.3, "
        "0.30000000000000004]\n");

  const auto a = parse_config(kPair);
  auto b = a;
  b.particles[0].velocity[1] = std::nextafter(b.particles[0].velocity[1], 1.0);
  CHECK_FALSE(a == b);
  CHECK_FALSE(parse_config(serialize_config(b)) == a);
}

TEST_CASE("overrides take precedence over the file") {
  auto cfg = parse_config("[scenario]\nepsilons = [0.1, 0.01]\n" + std::string("[[particle]]\ncharge = 1.0\n"
                                                                              "mass = 1.0\nposition = [0, 0, 0]\n"));
  Overrides ov;
  ov.epsilon = 0.2;
  ov.model = "darwin,third_order";
  ov.seed = 99;
  ov.out = "elsewhere";
  ov.tol = 1e-9;
  apply_overrides(cfg, ov);
  CHECK(cfg.epsilon == 0.2);
  CHECK(cfg.epsilons.empty());
  CHECK(cfg.models == std::vector<Model>{Model::Darwin, Model::ThirdOrder});
  CHECK(cfg.seed == 99);
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.stepper.abs_tol == 1e-9);
  CHECK(cfg.stepper.rel_tol == 1e-9);

  Overrides bad;
  bad.model = "darwin,nope";
  CHECK_THROWS_AS(apply_overrides(cfg, bad), Error);
}

TEST_CASE("exit codes are one per termination reason") {
  CHECK(exit_code(Termination::Completed) == 0);
  CHECK(exit_code(Termination::Collision) == 2);
  CHECK(exit_code(Termination::Escape) == 3);
  CHECK(exit_code(Termination::SolverFailure) == 4);
  CHECK(exit_code(Termination::RunawaySuspected) == 5);
}

TEST_CASE("worker pool") {
  ::setenv("PCDYN_THREADS", "3", 1);
  CHECK(worker_count(10) == 3);
  CHECK(worker_count(2) == 2);
  ::setenv("PCDYN_THREADS", "junk", 1);
  CHECK(worker_count(1) == 1);
  ::unsetenv("PCDYN_THREADS");

  std::vector<int> out(50, 0);
  run_parallel(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(run_parallel(4, [](std::size_t i) {
                    if (i == 2) throw Error(ErrorCode::InvalidArgument, "boom");
                  }),
                  Error);
}

TEST_CASE("simulate writes a versioned CSV and summary") {
  TempDir dir;
  auto cfg = parse_config(kPair);
  cfg.out_dir = dir.path.string();
  std::ostringstream log;
  CHECK(cmd_simulate(cfg, log) == kExitOk);

  const auto table = read_trajectory_csv(dir / "trajectory.csv");
  CHECK(slurp(dir / "trajectory.csv").rfind("# pcdyn-csv v1\n", 0) == 0);
  CHECK(table.meta.at("model") == "coulomb");
  CHECK(table.meta.at("seed") == "7");
  CHECK(table.columns == csv_columns(2, false));
  REQUIRE(table.rows.size() == 21);
  for (std::size_t i = 1; i < table.rows.size(); ++i) CHECK(table.rows[i][0] > table.rows[i - 1][0]);
  CHECK(table.rows.back()[0] == 1.0);
  const auto sys = system_from_meta(table);
  CHECK(sys.charges == std::vector<double>{1.0, -1.0});

  const auto summary = slurp(dir / "summary.json");
  CHECK(summary.find("\"termination\": \"completed\"") != std::string::npos);

  std::ostringstream audit;
  CHECK(cmd_energy_audit(dir / "trajectory.csv", 1e-8, dir.path.string(), audit) == kExitOk);
  CHECK(fs::exists(dir / "audit.json"));
}

TEST_CASE("simulate is deterministic across processes") {
  TempDir dir;
  write(dir / "pair.toml", std::string(kPair) + "[generate]\ncount = 3\n");
  // [generate] and [[particle]] together are rejected; use a generated scenario instead.
  write(dir / "gen.toml", "[scenario]\nseed = 5\nmodels = [\"darwin\"]\nt_end = 0.5\n[generate]\ncount = 3\n"
                          "[stepper]\nsample_interval = 0.05\n");
  CHECK(run_exe("simulate --config " + (dir / "pair.toml") + " --out " + (dir / "x")) == kExitConfig);
  REQUIRE(run_exe("simulate --config " + (dir / "gen.toml") + " --out " + (dir / "a")) == kExitOk);
  REQUIRE(run_exe("simulate --config " + (dir / "gen.toml") + " --out " + (dir / "b")) == kExitOk);
  const auto a = slurp(dir / "a/trajectory.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "b/trajectory.csv"));
  CHECK(slurp(dir / "a/summary.json") == slurp(dir / "b/summary.json"));

  REQUIRE(run_exe("simulate --config " + (dir / "gen.toml") + " --seed 6 --out " + (dir / "c")) == kExitOk);
  CHECK(a != slurp(dir / "c/trajectory.csv"));
  CHECK(run_exe("energy-audit " + (dir / "a/trajectory.csv")) == kExitOk);
}

TEST_CASE("process exit codes") {
  TempDir dir;
  std::string fall = kPair;
  for (const char* v : {"velocity = [0.0, 0.16666666666666666, 0.0]", "velocity = [0.0, -0.08333333333333333, 0.0]"}) {
    fall.replace(fall.find(v), std::string(v).size(), "velocity = [0.0, 0.0, 0.0]");
  }
  fall.replace(fall.find("t_end = 1.0"), 11, "t_end = 5.0");
  write(dir / "fall.toml", fall);
  CHECK(run_exe("simulate --config " + (dir / "fall.toml") + " --out " + (dir / "f")) == kExitCollision);
  CHECK(slurp(dir / "f/summary.json").find("\"termination\": \"collision\"") != std::string::npos);

  // Unbound pair: runs until the separation passes the escape radius.
  std::string esc = kPair;
  esc.replace(esc.find("0.16666666666666666"), 19, "0.6");
  esc.replace(esc.find("-0.08333333333333333"), 20, "-0.3");
  esc.replace(esc.find("t_end = 1.0"), 11, "t_end = 500.0");
  write(dir / "esc.toml", esc + "[guard]\nmin_separation = 0.1\nescape_radius = 5.0\n");
  CHECK(run_exe("simulate --config " + (dir / "esc.toml") + " --out " + (dir / "e")) == kExitEscape);

  write(dir / "pair.toml", kPair);
  CHECK(run_exe("simulate --config " + (dir / "pair.toml") + " --out " + (dir / "p")) == kExitOk);
  CHECK(run_exe("simulate --config " + (dir / "pair.toml") + " --epsilon 2") == kExitConfig);
  CHECK(run_exe("simulate --config " + (dir / "missing.toml")) == kExitConfig);
  CHECK(run_exe("simulate") == kExitConfig);
  CHECK(run_exe("frobnicate") == kExitConfig);
  CHECK(run_exe("verify-algebra --trials 0") == kExitOk);
  CHECK(run_exe("verify-algebra --seed 3 --trials 25") == kExitOk);
  CHECK(run_exe("scaling-study --synthetic 2.0") == kExitOk);
  CHECK(run_exe("scaling-study --config " + (dir / "pair.toml")) == kExitConfig);
}

TEST_CASE("compare with equal charge-to-mass ratios reports zero gaps") {
  TempDir dir;
  auto cfg = parse_config(R"(
[scenario]
epsilon = 0.05
models = ["darwin", "rr_reduced"]
t_end = 1.0
[[particle]]
charge = 1.0
mass = 1.0
position = [0.5, 0.0, 0.0]
velocity = [0.0, 0.12, 0.0]
[[particle]]
charge = 1.0
mass = 1.0
position = [-0.5, 0.0, 0.0]
velocity = [0.0, -0.12, 0.0]
[stepper]
sample_interval = 0.05
)");
  cfg.out_dir = dir.path.string();
  std::ostringstream log;
  CHECK(cmd_compare(cfg, log) == kExitOk);
  const auto out = slurp(dir / "compare.json");
  CHECK(out.find("\"sup_dr\": 0.0") != std::string::npos);
  CHECK(out.find("\"sup_du\": 0.0") != std::string::npos);

  cfg.models = {Model::Darwin};
  CHECK_THROWS_AS(cmd_compare(cfg, log), Error);
}

TEST_CASE("darwin and coulomb separate less as eps shrinks") {
  TempDir dir;
  auto cfg = parse_config(kPair);
  cfg.models = {Model::Coulomb, Model::Darwin};
  cfg.epsilons = {0.1, 0.03, 0.01};
  cfg.out_dir = dir.path.string();
  std::ostringstream log;
  CHECK(cmd_scaling_study(cfg, log) == kExitOk);
  const auto out = slurp(dir / "scaling.json");
  const auto at = out.find("\"sup_dudot\": {");
  REQUIRE(at != std::string::npos);
  const auto slope_at = out.find("\"slope\": ", at);
  const double slope = std::stod(out.substr(slope_at + 9));
  CHECK(slope == doctest::Approx(1.0).epsilon(0.1));

  cfg.epsilons = {0.1, 0.01};
  CHECK_THROWS_AS(cmd_scaling_study(cfg, log), Error);
}

TEST_CASE("scaling self-test recovers an injected slope") {
  std::ostringstream log;
  CHECK(cmd_scaling_self_test({1e-1, 3e-2, 1e-2, 3e-3}, 1.5, 1, std::nullopt, log) == kExitOk);
  CHECK(cmd_scaling_self_test({1e-1, 3e-2, 1e-2}, -0.5, 2, std::nullopt, log) == kExitOk);
  CHECK_THROWS_AS(cmd_scaling_self_test({1e-1, 3e-2}, 1.0, 1, std::nullopt, log), Error);
}

TEST_CASE("verify-algebra") {
  std::ostringstream log;
  CHECK(cmd_verify_algebra(1, 0, std::nullopt, log) == kExitOk);
  CHECK(log.str().find("equals 8") != std::string::npos);
  CHECK(log.str().find("closed-form determinant vs LU") == std::string::npos);
  std::ostringstream full;
  CHECK(cmd_verify_algebra(42, 50, std::nullopt, full) == kExitOk);
  CHECK(full.str().find("FAIL") == std::string::npos);
  CHECK_THROWS_AS(cmd_verify_algebra(1, -1, std::nullopt, full), Error);
}

TEST_CASE("energy audit flags tampered files") {
  TempDir dir;
  auto cfg = parse_config(kPair);
  cfg.models = {Model::Darwin};
  cfg.out_dir = dir.path.string();
  std::ostringstream log;
  REQUIRE(cmd_simulate(cfg, log) == kExitOk);
  CHECK(cmd_energy_audit(dir / "trajectory.csv", 1e-8, std::nullopt, log) == kExitOk);

  // Shift one velocity component in the last row.
  auto text = slurp(dir / "trajectory.csv");
  auto last = text.rfind('\n', text.size() - 2) + 1;
  std::vector<std::string> fields;
  std::stringstream row(text.substr(last));
  for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
  fields[8] = "0.5";
  std::string rebuilt;
  for (std::size_t i = 0; i < fields.size(); ++i) rebuilt += (i ? "," : "") + fields[i];
  write(dir / "bad.csv", text.substr(0, last) + rebuilt);
  CHECK(cmd_energy_audit(dir / "bad.csv", 1e-8, std::nullopt, log) == kExitCheckFailed);

  write(dir / "junk.csv", "t,x\n1,2\n");
  CHECK_THROWS_AS(cmd_energy_audit(dir / "junk.csv", 1e-8, std::nullopt, log), Error);
}
