#pragma once

#include "pcdyn/forces.hpp"
#include "pcdyn/integrate.hpp"
#include "pcdyn/manifold.hpp"
#include "pcdyn/params.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcdyn::cli {

/// One particle: either a bare mass (effective masses follow from the form
/// factor) or the pair (mass, star_mass) given directly.
struct ParticleSpec {
  double charge = 0.0;
  std::optional<double> bare_mass;
  std::optional<double> mass;
  std::optional<double> star_mass;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();

  bool operator==(const ParticleSpec&) const = default;
};

/// Random particles drawn from the scenario seed instead of a [[particle]] list.
struct GenerateSpec {
  int count = 0;
  double extent = 1.5;
  double min_separation = 0.5;
  double speed = 0.3;

  bool operator==(const GenerateSpec&) const = default;
};

struct ScenarioConfig {
  std::vector<ParticleSpec> particles;
  std::optional<GenerateSpec> generate;
  double support_radius = 1.0;
  double sharpness = 1.0;

  double epsilon = 0.01;
  std::vector<double> epsilons;
  std::vector<Model> models{Model::Darwin};
  double t_start = 0.0;
  double t_end = 1.0;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::size_t compare_points = 201;

  StepperConfig stepper;
  /// Unset bands come from the initial data, unset guard from the bands.
  std::optional<Regularization> regularization;
  std::optional<CollisionGuard> guard;
  OnManifoldConfig manifold;

  /// Where each field was read from ("origin:line"); not part of equality.
  std::map<std::string, std::string> sources;

  bool operator==(const ScenarioConfig& o) const;
};

/// Parses TOML text; `origin` names the source in diagnostics. Throws
/// Error(Config) with "origin:line: field: reason".
ScenarioConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ScenarioConfig load_config(const std::string& path);
/// Writes a TOML document that parses back to an equal config.
std::string serialize_config(const ScenarioConfig& cfg);

/// Checks the invariants (N >= 1, distinct positions, eps in (0, 1], ...).
void validate(const ScenarioConfig& cfg);

/// The concrete system and initial data a config describes.
struct Scenario {
  ParticleSystem system;
  PhaseState initial;
  Regularization regularization;
  CollisionGuard guard;
};

Scenario build_scenario(const ScenarioConfig& cfg);

}  // namespace pcdyn::cli
