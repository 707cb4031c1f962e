#pragma once

// Scenario JSON documents and the CSV tables written by the command line.
// All labels in files are 1-based (options, trajectory states).

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mfdsm/kernel.hpp"
#include "mfdsm/model.hpp"
#include "mfdsm/simulator.hpp"
#include "mfdsm/solver.hpp"

namespace mfdsm {

/// Parses a scenario document. Syntax errors carry line and column; unknown
/// keys, missing keys and wrong types are ParseError as well. The result is
/// not validated.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& scn);

/// Reads and parses; FileNotFound if the path cannot be opened.
Scenario load_scenario(const std::filesystem::path& path);

/// Shortest decimal string that round-trips the double.
std::string format_double(double x);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

std::string policy_csv(const Policy& pol);
std::string value_csv(const ValueFunction& v);
std::string trace_csv(const SimulationTrace& trace);
std::string kernel_row_csv(std::span<const double> row);
/// One line per (x, m_count, s) with the option a user in state x applies.
std::string policy_grid_csv(const Policy& pol);
std::string sample_path_csv(const SimulationTrace& trace);

/// Files staged in memory and published together: each is written to a
/// temporary sibling and renamed into place only after every write
/// succeeded.
class OutputBundle {
 public:
  void add(std::filesystem::path path, std::string content);
  void commit() const;
  const std::vector<std::pair<std::filesystem::path, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace mfdsm
