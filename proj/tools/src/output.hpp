#pragma once

#include "pcdyn/diagnostics.hpp"
#include "pcdyn/integrate.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pcdyn::cli {

inline constexpr const char* kCsvVersionLine = "# pcdyn-csv v1";

struct RunInfo {
  Model model = Model::Coulomb;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

/// Column names: t, r<a>_{x,y,z}, u<a>_{x,y,z}, [y_{x,y,z}], H_C, H_D, H_RR, rate, constraint_residual.
std::vector<std::string> csv_columns(int n, bool fast_variable);

/// Version line, one metadata comment line, the column header, then one row
/// per sample. Numbers are printed in shortest round-trip form.
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const ParticleSystem& sys,
                          const RunInfo& info);

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

/// Reads a file written by write_trajectory_csv; throws Error(Config) on a malformed file.
CsvTable read_trajectory_csv(const std::string& path);

/// Rebuilds the particle system recorded in the metadata line.
ParticleSystem system_from_meta(const CsvTable& table);

void write_text(const std::string& path, const std::string& text);

}  // namespace pcdyn::cli
