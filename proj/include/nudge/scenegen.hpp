#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nudge/rng.hpp"
#include "nudge/scene.hpp"

namespace nudge {

/// Command channel regimes: reliable passes the lanelet command through,
/// random replaces it with a uniform one-hot draw at train and eval alike.
enum class Regime { kReliable, kRandom };

const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct GeneratorConfig {
  double speed_min = 1.0;
  double speed_max = 12.0;
  double stop_speed_min = 0.3;
  double stop_speed_max = 1.6;
  double curvature_min = 0.02;
  double curvature_max = 0.15;
  // Turns begin this far ahead of the ego; past the planner's feature
  // stations but well inside the 20 m command lookahead.
  double turn_onset_min = 5.5;
  double turn_onset_max = 8.0;
  double turn_angle_min_deg = 60.0;
  double turn_angle_max_deg = 100.0;
  double lateral_accel_max = 2.5;  // caps speed on tight arcs
  double stop_time_min = 1.0;
  double stop_time_max = 4.0;
  double noise_sigma = 0.1;
  double filler_fraction = 0.25;
  std::array<double, 4> maneuver_mix{0.3, 0.3, 0.3, 0.1};  // left/straight/right/stop
  double lanelet_spacing = 1.0;
  double lanelet_behind = 12.0;
  double lanelet_ahead = 45.0;
  int max_distractors = 2;
  double distractor_offset = 3.5;

  void validate() const;  // ConfigError on bad ranges
};

struct CommandRuleConfig {
  double lookahead = 20.0;      // meters of centerline ahead of the match point
  double threshold_deg = 15.0;  // signed heading-change threshold

  void validate() const;
};

/// Deterministic synthetic dataset: each scene is generated from an
/// independent stream fork(seed, id), so disjoint id ranges can be produced
/// in parallel and ids alone pin content.
std::vector<Scene> generate_dataset(uint64_t seed, int n_scenes, const GeneratorConfig& config,
                                    Split split = Split::kTrain, int64_t id_offset = 0);

/// Templated instruction for a maneuver; with probability filler_fraction the
/// result is a maneuver-neutral filler so language stays a noisy channel.
std::string instruction_for(Maneuver m, double filler_fraction, Rng& rng);

/// Template sets, exposed for census-style tests.
const std::vector<std::string>& instruction_templates(Maneuver m);
const std::vector<std::string>& filler_templates();

/// Past-only command: match the ego to the nearest lanelet centerline and
/// threshold the signed heading change over the next `lookahead` meters.
/// Ties go to the smaller lanelet index. Uses no future ego motion.
Command infer_lanelet_command(const Polyline& history, const std::vector<Polyline>& lanelets,
                              const CommandRuleConfig& rule = {});

/// Reliable regime: identity. Random regime: OneHot(Uniform{0,1,2}),
/// independent of the input command.
Command perturb_command(const Command& c, Regime regime, Rng& rng);

}  // namespace nudge
