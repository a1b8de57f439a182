#include "nudge/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nudge/errors.hpp"

namespace nudge {

namespace {
constexpr double kDegToRad = 3.141592653589793238462643383279502884 / 180.0;
}

const char* to_string(Regime r) { return r == Regime::kReliable ? "reliable" : "random"; }

Regime regime_from_string(const std::string& s) {
  if (s == "reliable") return Regime::kReliable;
  if (s == "random") return Regime::kRandom;
  throw ConfigError("unknown regime: " + s + " (expected reliable|random)");
}

void GeneratorConfig::validate() const {
  auto positive_range = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0) || !(hi >= lo)) {
      throw ConfigError(std::string("generator: bad range for ") + what);
    }
  };
  positive_range(speed_min, speed_max, "speed_min/speed_max");
  positive_range(stop_speed_min, stop_speed_max, "stop_speed_min/stop_speed_max");
  positive_range(curvature_min, curvature_max, "curvature_min/curvature_max");
  positive_range(turn_onset_min, turn_onset_max, "turn_onset_min/turn_onset_max");
  positive_range(turn_angle_min_deg, turn_angle_max_deg, "turn_angle_min_deg/turn_angle_max_deg");
  positive_range(stop_time_min, stop_time_max, "stop_time_min/stop_time_max");
  if (lateral_accel_max <= 0.0) throw ConfigError("generator: lateral_accel_max must be > 0");
  if (noise_sigma < 0.0) throw ConfigError("generator: noise_sigma must be >= 0");
  if (filler_fraction < 0.0 || filler_fraction > 1.0) {
    throw ConfigError("generator: filler_fraction must be in [0, 1]");
  }
  double mix_total = 0.0;
  for (double m : maneuver_mix) {
    if (m < 0.0) throw ConfigError("generator: maneuver_mix entries must be >= 0");
    mix_total += m;
  }
  if (std::abs(mix_total - 1.0) > 1e-9) {
    throw ConfigError("generator: maneuver_mix must sum to 1");
  }
  if (lanelet_spacing <= 0.0) throw ConfigError("generator: lanelet_spacing must be > 0");
  if (max_distractors < 0) throw ConfigError("generator: max_distractors must be >= 0");
  if (distractor_offset <= 0.0) throw ConfigError("generator: distractor_offset must be > 0");
  if (stop_speed_max > 2.0) {
    throw ConfigError("generator: stop_speed_max must be <= 2 m/s (stop scenes must be slow)");
  }
}

void CommandRuleConfig::validate() const {
  if (lookahead <= 0.0) throw ConfigError("command rule: lookahead must be > 0");
  if (threshold_deg <= 0.0 || threshold_deg >= 180.0) {
    throw ConfigError("command rule: threshold_deg must be in (0, 180)");
  }
}

namespace {

const std::vector<std::string>& left_templates() {
  static const std::vector<std::string> t = {
      "turn left at the next intersection",
      "take the next left",
      "go left here",
      "make a left turn ahead",
      "turn left after the crosswalk",
      "bear left at the fork",
      "please turn left",
  };
  return t;
}

const std::vector<std::string>& right_templates() {
  static const std::vector<std::string> t = {
      "turn right at the next intersection",
      "take the next right",
      "go right here",
      "make a right turn ahead",
      "turn right after the crosswalk",
      "bear right at the fork",
      "please turn right",
  };
  return t;
}

const std::vector<std::string>& straight_templates() {
  static const std::vector<std::string> t = {
      "continue straight through the intersection",
      "keep going straight",
      "go straight ahead",
      "stay on this road",
      "head straight past the light",
      "proceed straight at the junction",
      "just keep straight",
  };
  return t;
}

const std::vector<std::string>& stop_templates() {
  // Short hard-stop phrasings; every entry carries a stop cue under 12 words.
  static const std::vector<std::string> t = {
      "stop",
      "please stop here",
      "stop now",
      "come to a stop",
      "halt",
      "pull over and stop",
      "brake and come to a stop",
      "stop at the curb",
  };
  return t;
}

Maneuver draw_maneuver(const std::array<double, 4>& mix, Rng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  static const Maneuver order[4] = {Maneuver::kLeft, Maneuver::kStraight, Maneuver::kRight,
                                    Maneuver::kStop};
  for (int i = 0; i < 4; ++i) {
    acc += mix[i];
    if (u < acc) return order[i];
  }
  return Maneuver::kStop;
}

// Arc-length position of a stopping profile: initial speed v0 decaying
// linearly to zero at t_stop, then parked.
double stop_arc_position(double v0, double t_stop, double t) {
  if (t >= t_stop) return 0.5 * v0 * t_stop;
  return v0 * (t - t * t / (2.0 * t_stop));
}

}  // namespace

const std::vector<std::string>& instruction_templates(Maneuver m) {
  switch (m) {
    case Maneuver::kLeft: return left_templates();
    case Maneuver::kRight: return right_templates();
    case Maneuver::kStraight: return straight_templates();
    case Maneuver::kStop: return stop_templates();
  }
  return straight_templates();
}

const std::vector<std::string>& filler_templates() {
  static const std::vector<std::string> t = {
      "continue as appropriate",
      "drive normally",
      "proceed as planned",
      "carry on",
      "do whatever is appropriate",
      "keep driving as usual",
  };
  return t;
}

std::string instruction_for(Maneuver m, double filler_fraction, Rng& rng) {
  const bool filler = rng.next_double() < filler_fraction;
  const auto& pool = filler ? filler_templates() : instruction_templates(m);
  return pool[rng.next_int(static_cast<int>(pool.size()))];
}

std::vector<Scene> generate_dataset(uint64_t seed, int n_scenes, const GeneratorConfig& config,
                                    Split split, int64_t id_offset) {
  config.validate();
  if (n_scenes <= 0) throw ConfigError("generate_dataset: n_scenes must be > 0");

  std::vector<Scene> scenes;
  scenes.reserve(n_scenes);
  for (int i = 0; i < n_scenes; ++i) {
    const int64_t id = id_offset + i;
    Rng rng = Rng::fork(seed, static_cast<uint64_t>(id));

    Scene s;
    s.id = id;
    s.split = split;
    s.maneuver = draw_maneuver(config.maneuver_mix, rng);

    RoutePath route;
    double speed = 0.0;
    double stop_time = 0.0;
    switch (s.maneuver) {
      case Maneuver::kLeft:
      case Maneuver::kRight: {
        const double sign = (s.maneuver == Maneuver::kLeft) ? 1.0 : -1.0;
        const double curv = rng.uniform(config.curvature_min, config.curvature_max);
        const double angle =
            rng.uniform(config.turn_angle_min_deg, config.turn_angle_max_deg) * kDegToRad;
        route.onset = rng.uniform(config.turn_onset_min, config.turn_onset_max);
        route.curvature = sign * curv;
        route.arc_length = angle / curv;
        const double v_cap = std::min(config.speed_max, std::sqrt(config.lateral_accel_max / curv));
        speed = rng.uniform(config.speed_min, std::max(config.speed_min, v_cap));
        break;
      }
      case Maneuver::kStraight: {
        speed = rng.uniform(config.speed_min, config.speed_max);
        break;
      }
      case Maneuver::kStop: {
        speed = rng.uniform(config.stop_speed_min, config.stop_speed_max);
        stop_time = rng.uniform(config.stop_time_min, config.stop_time_max);
        break;
      }
    }

    // Future waypoints along the route (noise added below).
    Polyline future_clean;
    for (int k = 1; k <= kHorizonSteps; ++k) {
      const double t = k * kStepSeconds;
      const double arc =
          (s.maneuver == Maneuver::kStop) ? stop_arc_position(speed, stop_time, t) : speed * t;
      future_clean.push_back(route.position(arc));
    }

    // History: constant speed approach ending exactly at the origin.
    Polyline history_clean;
    for (int j = 0; j < kHistorySteps; ++j) {
      const double t_back = (kHistorySteps - 1 - j) * kStepSeconds;
      history_clean.push_back(route.position(-speed * t_back));
    }

    auto add_noise = [&](const Polyline& clean, bool pin_last, Rng& noise_rng) {
      Polyline noisy = clean;
      for (size_t j = 0; j < noisy.size(); ++j) {
        if (pin_last && j + 1 == noisy.size()) break;  // origin invariant
        noisy[j].x += config.noise_sigma * noise_rng.normal();
        noisy[j].y += config.noise_sigma * noise_rng.normal();
      }
      return noisy;
    };

    s.future = add_noise(future_clean, false, rng);
    s.history = add_noise(history_clean, true, rng);
    if (s.maneuver == Maneuver::kStop) {
      // Redraw history noise (deterministically) until the slow-history
      // invariant holds; fall back to the clean history if needed.
      int attempts = 0;
      while (mean_history_speed(s.history) > 2.0 && attempts < 16) {
        s.history = add_noise(history_clean, true, rng);
        ++attempts;
      }
      if (mean_history_speed(s.history) > 2.0) s.history = history_clean;
    }

    // Route lanelet covering history, future, and the command lookahead.
    const double ahead = std::max(config.lanelet_ahead, speed * 6.0 + 10.0);
    s.lanelets.push_back(route.sample(-config.lanelet_behind, ahead, config.lanelet_spacing));

    // Parallel straight distractors, offset laterally.
    const int n_distract = config.max_distractors > 0 ? rng.next_int(config.max_distractors + 1) : 0;
    for (int d = 0; d < n_distract; ++d) {
      const double side = (d % 2 == 0) ? 1.0 : -1.0;
      const double offset = side * config.distractor_offset * (1.0 + d / 2);
      Polyline lane;
      for (double x = -config.lanelet_behind; x <= ahead; x += config.lanelet_spacing) {
        lane.push_back({x, offset});
      }
      s.lanelets.push_back(std::move(lane));
    }

    s.instruction = instruction_for(s.maneuver, config.filler_fraction, rng);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

Command infer_lanelet_command(const Polyline& history, const std::vector<Polyline>& lanelets,
                              const CommandRuleConfig& rule) {
  rule.validate();
  if (history.size() < 2) {
    throw UsageError("infer_lanelet_command: history needs >= 2 points");
  }
  if (lanelets.empty()) {
    throw UsageError("infer_lanelet_command: no lanelets");
  }
  const Vec2 ego = history.back();
  int best = -1;
  Projection best_proj;
  best_proj.dist2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < lanelets.size(); ++i) {
    if (lanelets[i].size() < 2) continue;
    const Projection proj = project_onto(lanelets[i], ego);
    if (proj.dist2 < best_proj.dist2) {  // strict: ties keep the smaller index
      best_proj = proj;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw UsageError("infer_lanelet_command: no usable lanelet");
  const Polyline& lane = lanelets[best];
  const std::vector<double> cum = cumulative_lengths(lane);
  const double change = heading_change(lane, cum, best_proj.arc_length, rule.lookahead);
  const double threshold = rule.threshold_deg * kDegToRad;
  if (change > threshold) return Command::left();
  if (change < -threshold) return Command::right();
  return Command::straight();
}

Command perturb_command(const Command& c, Regime regime, Rng& rng) {
  if (regime == Regime::kReliable) return c;
  return Command::from_index(rng.next_int(3));
}

}  // namespace nudge
