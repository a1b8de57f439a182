#pragma once

#include <string>

#include <json.hpp>

#include "nudge/adapter.hpp"
#include "nudge/evaluator.hpp"
#include "nudge/planner.hpp"
#include "nudge/scenegen.hpp"
#include "nudge/trainer.hpp"

namespace nudge {

struct DatasetConfig {
  int n_train = 768;
  int n_val = 256;
  GeneratorConfig generator;

  void validate() const;
};

struct EvalSettings {
  uint64_t eval_seed = 9001;
  bool stop_override = true;
  bool dump_trajectories = false;
  OverrideRuleConfig override_rule;
};

/// Every knob of every module, resolved from a single JSON file. Unknown keys
/// are rejected; the canonical hash of the resolved config is echoed into
/// every artifact the pipeline writes.
struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir = "runs/out";
  DatasetConfig dataset;
  PlannerConfig planner;
  double init_budget_fraction = 0.1;
  AdapterConfig adapter;
  TrainConfig train;
  EvalSettings eval;

  void validate() const;
};

/// Parse with strict key checking (ConfigError on unknown or ill-typed keys).
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Resolved canonical form (every knob explicit, keys sorted by nlohmann).
nlohmann::json run_config_to_json(const RunConfig& config);

/// FNV-1a over the canonical dump.
std::string config_hash(const RunConfig& config);

/// Apply a dotted-path override like "train.epochs=30" onto raw JSON before
/// parsing. Values parse as JSON when possible, else as strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace nudge
