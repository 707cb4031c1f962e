#pragma once

// Pipelines behind the command-line subcommands that produce file bundles.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mfdsm/io.hpp"
#include "mfdsm/simulator.hpp"
#include "mfdsm/solver.hpp"

namespace mfdsm {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> flags;
  std::string scenario_source;
  std::string scenario_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;

  std::string to_json() const;
};

struct Example1Options {
  std::filesystem::path out_dir = "example1";
  std::uint64_t seed = 1;
  std::size_t horizon = 200;
  double epsilon = 0.01;
  unsigned threads = 1;
};

struct Example1Run {
  Scenario scenario;
  SolveResult solved;
  SimulationTrace path;
  RunManifest manifest;
};

/// Solves the built-in peak-load instance and simulates one seeded path
/// from a Bernoulli(p) population. Writes scenario.json, policy.csv, value.csv,
/// fig2_policy.csv, fig3_path.csv and manifest.json into out_dir.
Example1Run replicate_example1(const Example1Options& opts);

}  // namespace mfdsm
