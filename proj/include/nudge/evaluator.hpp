#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nudge/adapter.hpp"
#include "nudge/planner.hpp"
#include "nudge/scenegen.hpp"

namespace nudge {

/// Mean Euclidean displacement over the full horizon.
double ade(const Polyline& prediction, const Polyline& truth);
/// Displacement at the final waypoint.
double fde(const Polyline& prediction, const Polyline& truth);
/// Mean displacement over the first k seconds (waypoints 1..2k at 2 Hz);
/// a@6s coincides with ADE by definition.
double a_at(const Polyline& prediction, const Polyline& truth, int k_seconds);

/// Conservative stop override: fires only when the text carries a hard-stop
/// cue, carries no conflicting action verb or stop-related noun phrase, stays
/// under the word budget, and the history is slow. All four must hold.
struct OverrideRuleConfig {
  std::vector<std::string> hard_stop{"stop", "halt", "pull over", "brake"};
  std::vector<std::string> conflict_verbs{"turn",     "follow", "pass",
                                          "continue", "merge",  "overtake"};
  std::vector<std::string> conflict_nouns{"stop sign", "bus stop", "stop light"};
  int max_words = 12;
  double max_mean_speed = 2.0;  // m/s over the history
  enum class Mode { kHold, kDecelRamp } mode = Mode::kHold;
  double ramp_seconds = 2.0;

  void validate() const;
};

struct OverrideOutcome {
  Polyline trajectory;
  bool fired = false;
  std::string reason;  // audit trail: why it fired or which gate blocked it
};

OverrideOutcome stop_override(const std::string& instruction, const Polyline& history,
                              const Polyline& prediction, const OverrideRuleConfig& rule = {});

struct EvalConfig {
  Regime regime = Regime::kReliable;
  uint64_t eval_seed = 9001;
  OverrideRuleConfig override_rule;
};

/// The per-scene evaluation command: lanelet command put through the regime
/// perturbation with a stream forked from (eval_seed, scene id), so both text
/// passes of the same scene draw the identical command.
Command eval_command(const Scene& scene, const PlannerConfig& planner_config,
                     const EvalConfig& eval_config);

/// One row of a report: a frozen planner checkpoint, optionally with an
/// adapter on top.
struct MethodSpec {
  std::string name;
  const PlannerParams* theta = nullptr;
  const Adapter* adapter = nullptr;  // null: planner-only method
  bool with_text = true;             // adapter text pass for the row metrics
  bool compute_delta_ade = false;    // paired no-text/with-text passes
  bool use_override = false;
};

struct SceneAudit {
  int64_t scene_id = 0;
  int command = 1;
  bool override_fired = false;
  std::string override_reason;
};

struct MethodResult {
  std::string name;
  Regime regime = Regime::kReliable;
  double ade = 0.0;
  double fde = 0.0;
  std::array<double, 6> a_at{};  // a@1s .. a@6s
  std::optional<double> delta_ade;
  std::optional<double> gain;  // vs. the report's reference row
  std::vector<SceneAudit> audit;
};

struct SceneOutput {
  Command command;
  ModeTrajectories base;
  std::array<Polyline, kNumModes> residual;  // zeros for planner-only methods
  Polyline selected;
  bool override_fired = false;
  std::string override_reason;
};

SceneOutput evaluate_scene(const MethodSpec& method, const Scene& scene,
                           const PlannerConfig& planner_config, const EvalConfig& eval_config);

MethodResult evaluate_method(const MethodSpec& method, const std::vector<Scene>& scenes,
                             const PlannerConfig& planner_config, const EvalConfig& eval_config);

/// ADE(no-text) - ADE(with-text) for the same model and identical per-scene
/// commands; instrumentation asserts the pairing.
double delta_ade(const Adapter& adapter, const PlannerParams& theta,
                 const std::vector<Scene>& scenes, const PlannerConfig& planner_config,
                 const EvalConfig& eval_config);

struct EvalReport {
  std::vector<MethodResult> rows;
  Regime regime = Regime::kReliable;
  uint64_t eval_seed = 0;
  std::string config_hash;
  std::string gain_reference;  // row name the gain column is measured against
  std::map<std::string, std::string> checkpoint_hashes;
};

/// Evaluates every method and fills the gain column relative to the named
/// reference row (gain = reference ADE - method ADE; a@6s and ADE coincide).
/// Throws ReportError when the reference row is missing.
EvalReport build_report(const std::vector<MethodSpec>& methods, const std::vector<Scene>& scenes,
                        const PlannerConfig& planner_config, const EvalConfig& eval_config,
                        const std::string& gain_reference);

/// Fixed column order: method, regime, ADE, FDE, a@1..6, dADE, gain.
std::string report_to_csv(const EvalReport& report);
/// Metric rows parsed back from CSV; re-emitting parsed rows is byte-identical.
std::vector<MethodResult> report_rows_from_csv(const std::string& csv);
std::string report_to_json(const EvalReport& report);

/// Line-delimited per-scene dump (mode stack, residual, selected trajectory)
/// for offline plotting.
void dump_trajectories(const std::string& path, const MethodSpec& method,
                       const std::vector<Scene>& scenes, const PlannerConfig& planner_config,
                       const EvalConfig& eval_config, const std::string& config_hash = "");

}  // namespace nudge
