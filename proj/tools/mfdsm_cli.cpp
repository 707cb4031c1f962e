// mfdsm: solve, simulate and verify binary-demand mean-field teams.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mfdsm/commands.hpp"
#include "mfdsm/io.hpp"
#include "mfdsm/kernel.hpp"
#include "mfdsm/model.hpp"
#include "mfdsm/oracle.hpp"
#include "mfdsm/simulator.hpp"
#include "mfdsm/solver.hpp"

namespace fs = std::filesystem;
using namespace mfdsm;

namespace {

struct GlobalFlags {
  std::string scenario;
  std::string out;
  std::uint64_t seed = 1;
  std::string threads = "1";
};

unsigned parse_threads(const std::string& text) {
  if (text == "auto") return 0;
  try {
    const long v = std::stol(text);
    if (v >= 1) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidParameter, "--threads expects a positive integer or 'auto'");
}

Scenario scenario_from_flags(const GlobalFlags& g, std::string& source, std::string& hash) {
  if (g.scenario.empty()) {
    throw Error(ErrorCode::InvalidParameter, "--scenario <path> is required");
  }
  const std::string text = read_file(g.scenario);
  source = g.scenario;
  hash = fnv1a_hex(text);
  Scenario scn;
  try {
    scn = scenario_from_json(text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) {
      throw Error(ErrorCode::ParseError, g.scenario + ": " + e.what());
    }
    throw;
  }
  validate_scenario(scn);
  return scn;
}

ActionPair parse_pair(const std::string& text, std::size_t k) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorCode::InvalidParameter, "expected '<g_r>,<g_d>'");
  }
  const auto r = std::stoul(text.substr(0, comma));
  const auto d = std::stoul(text.substr(comma + 1));
  if (r < 1 || d < 1 || r > k || d > k) {
    throw Error(ErrorCode::OptionOutOfRange, "options are numbered 1.." + std::to_string(k));
  }
  return {r - 1, d - 1};
}

void print_report(const SolveReport& report) {
  std::cout << "iterations=" << report.iterations
            << " final_residual=" << format_double(report.final_residual)
            << " epsilon=" << format_double(report.epsilon)
            << " threshold=" << format_double(report.threshold)
            << " elapsed_s=" << std::fixed << std::setprecision(3) << report.elapsed.count()
            << std::defaultfloat << "\n";
}

void warn_slow_discount(const Scenario& scn, double epsilon) {
  if (scn.beta < 0.999) return;
  const double scale = std::max(max_per_step_cost(scn) / (1.0 - scn.beta), 1.0);
  const double sweeps =
      std::log(stopping_threshold(epsilon, scn.beta) / scale) / std::log(scn.beta);
  std::cerr << "warning: beta=" << scn.beta << " needs roughly " << std::llround(sweeps)
            << " sweeps to reach the stopping threshold\n";
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field demand-side management: solver, simulator and oracles"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--scenario", g.scenario, "Scenario JSON file");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (<n> or 'auto')");

  // solve
  auto* solve = app.add_subcommand("solve", "Value iteration; writes policy.csv and value.csv");
  double epsilon = 0.01;
  std::size_t max_iters = 100000;
  bool corollary = false;
  solve->add_option("--epsilon", epsilon, "Target epsilon-optimality")->capture_default_str();
  solve->add_option("--max-iters", max_iters, "Sweep limit")->capture_default_str();
  solve->add_flag("--corollary-mode", corollary, "State-dependent options and kernel");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulate the population under the solved policy");
  std::optional<std::size_t> horizon;
  std::size_t replications = 1;
  std::string init = "bernoulli";
  std::string fixed;
  simulate->add_option("--horizon", horizon, "Steps (default: tail bound below 1e-3)");
  simulate->add_option("--replications", replications, "Independent replications")->capture_default_str();
  simulate->add_option("--init", init, "Initial population")
      ->check(CLI::IsMember({"zero", "bernoulli"}))
      ->capture_default_str();
  simulate->add_option("--epsilon", epsilon, "Solver epsilon")->capture_default_str();
  simulate->add_option("--fixed-option", fixed, "Use the constant pair '<g_r>,<g_d>' instead of solving");
  simulate->add_flag("--corollary-mode", corollary, "State-dependent options and kernel");

  // kernel
  auto* kernel_cmd = app.add_subcommand("kernel", "Print one transition row as CSV");
  std::size_t m_count = 0, g_r = 1, g_d = 1, state = 1;
  kernel_cmd->add_option("--m-count", m_count, "Current number of active demands")->required();
  kernel_cmd->add_option("--g-r", g_r, "Reserve option (1-based)")->capture_default_str();
  kernel_cmd->add_option("--g-d", g_d, "Demand option (1-based)")->capture_default_str();
  kernel_cmd->add_option("--state", state, "Trajectory state (1-based, corollary mode)")->capture_default_str();
  kernel_cmd->add_flag("--corollary-mode", corollary, "State-dependent options");

  // verify
  auto* verify = app.add_subcommand("verify", "Run the brute-force oracle suite");
  double perturb = 0.0;
  verify->add_option("--perturb-kernel", perturb, "Corrupt one kernel entry (negative control)")
      ->group("");

  // replicate-example1
  auto* replicate = app.add_subcommand("replicate-example1", "Solve and simulate the peak-load example");
  std::size_t example_horizon = 200;
  replicate->add_option("--horizon", example_horizon, "Simulated steps")->capture_default_str();
  replicate->add_option("--epsilon", epsilon, "Solver epsilon")->capture_default_str();

  auto* example = app.add_subcommand("example-scenario", "Print the built-in peak-load scenario JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    const unsigned threads = parse_threads(g.threads);
    const auto start = std::chrono::steady_clock::now();

    if (*example) {
      std::cout << scenario_to_json(example1_scenario());
      return 0;
    }

    if (*replicate) {
      Example1Options opts;
      opts.out_dir = g.out.empty() ? fs::path("example1") : fs::path(g.out);
      opts.seed = g.seed;
      opts.horizon = example_horizon;
      opts.epsilon = epsilon;
      opts.threads = threads;
      const auto run = replicate_example1(opts);
      print_report(run.solved.report);
      std::cout << "discounted_total,truncation_bound\n"
                << format_double(run.path.discounted_total) << ','
                << format_double(run.path.truncation_bound) << "\n";
      for (const auto& out : run.manifest.outputs) std::cout << "wrote " << out << "\n";
      return 0;
    }

    if (*verify) {
      VerifyOptions opts;
      opts.kernel_perturbation = perturb;
      const auto results = run_verification(opts);
      bool all = true;
      std::cout << std::left << std::setw(40) << "check" << std::setw(8) << "result"
                << std::setw(14) << "max_dev" << std::setw(12) << "tolerance" << "detail\n";
      for (const auto& r : results) {
        all = all && r.passed;
        std::ostringstream dev, tol;
        dev << std::scientific << std::setprecision(3) << r.max_deviation;
        tol << std::scientific << std::setprecision(1) << r.tolerance;
        std::cout << std::left << std::setw(40) << r.name << std::setw(8)
                  << (r.passed ? "PASS" : "FAIL") << std::setw(14) << dev.str() << std::setw(12)
                  << tol.str() << r.detail << "\n";
      }
      std::cout << (all ? "all checks passed" : "verification FAILED") << "\n";
      return all ? 0 : 1;
    }

    std::string source, hash;
    const Scenario scn = scenario_from_flags(g, source, hash);

    if (*kernel_cmd) {
      if (g_r < 1 || g_d < 1 || g_r > scn.k() || g_d > scn.k()) {
        throw Error(ErrorCode::OptionOutOfRange, "options are numbered 1.." + std::to_string(scn.k()));
      }
      if (state < 1 || state > scn.trajectory.size()) {
        throw Error(ErrorCode::InvalidParameter, "--state outside 1..|S|");
      }
      if (scn.state_dependent() && !corollary) {
        throw Error(ErrorCode::InvalidParameter, "scenario has state overrides; pass --corollary-mode");
      }
      std::optional<std::size_t> s;
      if (corollary) s = state - 1;
      const auto row = transition_row(m_count, {g_r - 1, g_d - 1}, scn, s);
      const std::string csv = kernel_row_csv(row.weights());
      if (g.out.empty()) {
        std::cout << csv;
      } else {
        OutputBundle bundle;
        bundle.add(fs::path(g.out) / "kernel_row.csv", csv);
        bundle.commit();
      }
      return 0;
    }

    const fs::path out_dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
    RunManifest man;
    man.scenario_source = source;
    man.scenario_hash = hash;

    if (*solve) {
      warn_slow_discount(scn, epsilon);
      const auto kernel = build_kernel(scn, corollary, threads);
      const auto solved = value_iteration(scn, kernel, {epsilon, max_iters, threads});
      print_report(solved.report);
      OutputBundle bundle;
      bundle.add(out_dir / "policy.csv", policy_csv(solved.policy));
      bundle.add(out_dir / "value.csv", value_csv(solved.values));
      man.command = "solve";
      man.flags = {{"epsilon", format_double(epsilon)},
                   {"max_iters", std::to_string(max_iters)},
                   {"corollary_mode", corollary ? "true" : "false"},
                   {"threads", g.threads}};
      for (const auto& [path, content] : bundle.files()) man.outputs.push_back(path.string());
      man.outputs.push_back((out_dir / "manifest.json").string());
      man.duration_seconds = elapsed_since(start);
      bundle.add(out_dir / "manifest.json", man.to_json());
      bundle.commit();
      return 0;
    }

    if (*simulate) {
      Policy pol;
      if (!fixed.empty()) {
        pol = Policy::constant(scn.grid_size(), scn.trajectory.size(), parse_pair(fixed, scn.k()));
      } else {
        warn_slow_discount(scn, epsilon);
        const auto kernel = build_kernel(scn, corollary, threads);
        pol = value_iteration(scn, kernel, {epsilon, 100000, threads}).policy;
      }
      const std::size_t steps = horizon.value_or(default_horizon(scn));
      const InitMode mode = init == "zero" ? InitMode::AllZero : InitMode::Bernoulli;
      const auto trace = run_simulation(scn, pol, steps, g.seed, mode);
      std::cout << "discounted_total,truncation_bound\n"
                << format_double(trace.discounted_total) << ','
                << format_double(trace.truncation_bound) << "\n";
      man.seeds = {g.seed};
      if (replications > 1) {
        const auto est = estimate_cost(scn, pol, steps, replications, g.seed, mode, threads);
        std::cout << "mean,stderr,replications\n"
                  << format_double(est.mean) << ',' << format_double(*est.std_error) << ','
                  << est.replications << "\n";
        for (std::size_t r = 0; r < replications; ++r) {
          man.seeds.push_back(CounterRng::replication_seed(g.seed, r));
        }
      }
      OutputBundle bundle;
      bundle.add(out_dir / "trace.csv", trace_csv(trace));
      man.command = "simulate";
      man.flags = {{"horizon", std::to_string(steps)},
                   {"replications", std::to_string(replications)},
                   {"init", init},
                   {"epsilon", format_double(epsilon)},
                   {"fixed_option", fixed},
                   {"corollary_mode", corollary ? "true" : "false"},
                   {"threads", g.threads}};
      for (const auto& [path, content] : bundle.files()) man.outputs.push_back(path.string());
      man.outputs.push_back((out_dir / "manifest.json").string());
      man.duration_seconds = elapsed_since(start);
      bundle.add(out_dir / "manifest.json", man.to_json());
      bundle.commit();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
