#include "mfdsm/commands.hpp"

#include <chrono>

#include <json.hpp>

namespace mfdsm {

std::string RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["tool"] = "mfdsm";
  doc["version"] = kToolVersion;
  doc["command"] = command;
  nlohmann::ordered_json f = nlohmann::ordered_json::object();
  for (const auto& [key, value] : flags) f[key] = value;
  doc["flags"] = f;
  doc["scenario"] = {{"source", scenario_source}, {"fnv1a64", scenario_hash}};
  doc["seeds"] = seeds;
  doc["outputs"] = outputs;
  doc["duration_seconds"] = duration_seconds;
  return doc.dump(2) + "\n";
}

Example1Run replicate_example1(const Example1Options& opts) {
  const auto start = std::chrono::steady_clock::now();
  Example1Run run;
  run.scenario = example1_scenario();
  validate_scenario(run.scenario);
  const auto kernel = build_kernel(run.scenario, false, opts.threads);
  run.solved = value_iteration(run.scenario, kernel, {opts.epsilon, 100000, opts.threads});
  run.path = run_simulation(run.scenario, run.solved.policy, opts.horizon, opts.seed,
                            InitMode::Bernoulli);

  const std::string scenario_text = scenario_to_json(run.scenario);
  OutputBundle bundle;
  bundle.add(opts.out_dir / "scenario.json", scenario_text);
  bundle.add(opts.out_dir / "policy.csv", policy_csv(run.solved.policy));
  bundle.add(opts.out_dir / "value.csv", value_csv(run.solved.values));
  bundle.add(opts.out_dir / "fig2_policy.csv", policy_grid_csv(run.solved.policy));
  bundle.add(opts.out_dir / "fig3_path.csv", sample_path_csv(run.path));

  auto& man = run.manifest;
  man.command = "replicate-example1";
  man.flags = {{"epsilon", format_double(opts.epsilon)},
               {"horizon", std::to_string(opts.horizon)},
               {"init", "bernoulli"},
               {"threads", std::to_string(opts.threads)}};
  man.scenario_source = "builtin:example1";
  man.scenario_hash = fnv1a_hex(scenario_text);
  man.seeds = {opts.seed};
  for (const auto& [path, content] : bundle.files()) man.outputs.push_back(path.string());
  man.outputs.push_back((opts.out_dir / "manifest.json").string());
  man.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bundle.add(opts.out_dir / "manifest.json", man.to_json());
  bundle.commit();
  return run;
}

}  // namespace mfdsm
