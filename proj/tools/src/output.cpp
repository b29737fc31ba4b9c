#include "output.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pcdyn::cli {

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{}", i ? ";" : "", v[i]);
  return s;
}

std::vector<double> split_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(';', start), s.size());
    double x = 0.0;
    const auto res = std::from_chars(s.data() + start, s.data() + end, x);
    if (res.ec != std::errc() || res.ptr != s.data() + end) {
      throw Error(ErrorCode::Config, "csv metadata " + what + ": bad number list '" + s + "'");
    }
    out.push_back(x);
    start = end + 1;
  }
  return out;
}

}  // namespace

std::vector<std::string> csv_columns(int n, bool fast_variable) {
  std::vector<std::string> cols{"t"};
  for (const char* q : {"r", "u"}) {
    for (int a = 0; a < n; ++a) {
      for (const char* c : {"x", "y", "z"}) cols.push_back(fmt::format("{}{}_{}", q, a, c));
    }
  }
  if (fast_variable) {
    for (const char* c : {"x", "y", "z"}) cols.push_back(fmt::format("y_{}", c));
  }
  for (const char* c : {"H_C", "H_D", "H_RR", "rate", "constraint_residual"}) cols.emplace_back(c);
  return cols;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const ParticleSystem& sys,
                          const RunInfo& info) {
  const auto energies = energy_series(traj, sys, info.epsilon);
  std::string out;
  out += kCsvVersionLine;
  out += '\n';
  out += fmt::format("# model={} epsilon={} seed={} n={} charges={} masses={} star_masses={}\n",
                     model_name(info.model), info.epsilon, info.seed, sys.n(), join(sys.charges), join(sys.masses),
                     join(sys.star_masses));
  const auto cols = csv_columns(sys.n(), traj.has_fast_variable());
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out += fmt::format("{}", traj.times[i]);
    for (int k = 0; k < traj.states[i].size(); ++k) out += fmt::format(",{}", traj.states[i][k]);
    const auto& e = energies[i];
    out += fmt::format(",{},{},{},{},{}\n", e.h_coulomb, e.h_darwin, e.h_rr, e.dissipation_rate,
                       traj.constraint_residuals[i]);
  }
  write_text(path, out);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw Error(ErrorCode::Config, "csv: no column '" + name + "'");
}

CsvTable read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kCsvVersionLine) {
    throw Error(ErrorCode::Config, path + ":1: expected '" + std::string(kCsvVersionLine) + "'");
  }
  CsvTable table;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw Error(ErrorCode::Config, path + ":2: missing metadata");
  std::istringstream meta(line.substr(2));
  for (std::string kv; meta >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, path + ":2: bad metadata entry '" + kv + "'");
    table.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!std::getline(in, line)) throw Error(ErrorCode::Config, path + ":3: missing column header");
  std::istringstream header(line);
  for (std::string c; std::getline(header, c, ',');) table.columns.push_back(c);

  std::size_t lineno = 3;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double x = 0.0;
      const auto res = std::from_chars(p, comma, x);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw Error(ErrorCode::Config, fmt::format("{}:{}: bad number in column {}", path, lineno, row.size() + 1));
      }
      row.push_back(x);
      p = comma + 1;
    }
    if (row.size() != table.columns.size()) {
      throw Error(ErrorCode::Config, fmt::format("{}:{}: expected {} fields, found {}", path, lineno,
                                                 table.columns.size(), row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ParticleSystem system_from_meta(const CsvTable& table) {
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = table.meta.find(key);
    if (it == table.meta.end()) throw Error(ErrorCode::Config, "csv metadata: missing " + key);
    return it->second;
  };
  auto e = split_numbers(get("charges"), "charges");
  auto m = split_numbers(get("masses"), "masses");
  auto ms = split_numbers(get("star_masses"), "star_masses");
  if (m.size() != e.size() || ms.size() != e.size()) throw Error(ErrorCode::Config, "csv metadata: length mismatch");
  return ParticleSystem::from_effective(std::move(e), std::move(m), std::move(ms));
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Config, path + ": cannot open for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Config, path + ": write failed");
}

}  // namespace pcdyn::cli
