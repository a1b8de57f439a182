#include "nudge/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nudge/io.hpp"
#include "nudge/loss.hpp"
#include "nudge/tape.hpp"

namespace nudge {

void PlannerConfig::validate() const {
  if (feature_dim <= 0) throw ConfigError("planner: feature_dim must be > 0");
  if (feature_stations.empty()) throw ConfigError("planner: feature_stations must be non-empty");
  for (double s : feature_stations) {
    if (s <= 0.0) throw ConfigError("planner: feature_stations must be positive");
  }
  if (base_curvature <= 0.0) throw ConfigError("planner: base_curvature must be > 0");
  if (default_speed < 0.0) throw ConfigError("planner: default_speed must be >= 0");
  command_rule.validate();
}

PlannerParams PlannerParams::stage1(const PlannerConfig& config) {
  PlannerParams p;
  p.base_curvature = {config.base_curvature, 0.0, -config.base_curvature};
  p.curvature_weights = Matrix(config.feature_dim, kNumModes);
  p.curvature_bias = Matrix(1, kNumModes);
  p.speed_weights = Matrix(config.feature_dim, 1);
  p.speed_bias = Matrix::full(1, 1, config.default_speed);
  p.stage = "stage1";
  return p;
}

uint64_t PlannerParams::hash() const {
  uint64_t h = fnv1a64(stage.data(), stage.size());
  auto mix = [&h](const Matrix& m) {
    h = fnv1a64(m.data.data(), m.data.size() * sizeof(double), h);
  };
  h = fnv1a64(base_curvature.data(), base_curvature.size() * sizeof(double), h);
  mix(curvature_weights);
  mix(curvature_bias);
  mix(speed_weights);
  mix(speed_bias);
  return h;
}

void save_planner(const std::string& path, const PlannerParams& params,
                  const std::string& config_hash) {
  TextArchive a;
  a.set_field("kind", "planner-checkpoint");
  a.set_field("config_hash", config_hash);
  a.set_field("stage", params.stage);
  a.set_field("fit_steps", std::to_string(params.fit_steps));
  Matrix base(1, kNumModes);
  for (int m = 0; m < kNumModes; ++m) base.at(0, m) = params.base_curvature[m];
  a.add_tensor("planner.base_curvature", base);
  a.add_tensor("planner.curv_w", params.curvature_weights);
  a.add_tensor("planner.curv_b", params.curvature_bias);
  a.add_tensor("planner.speed_w", params.speed_weights);
  a.add_tensor("planner.speed_b", params.speed_bias);
  a.save(path);
}

PlannerParams load_planner(const std::string& path, std::string* config_hash_out) {
  const TextArchive a = TextArchive::load(path);
  if (a.field("kind") != "planner-checkpoint") {
    throw ParseError(path + ": not a planner checkpoint");
  }
  PlannerParams p;
  const Matrix& base = a.tensor("planner.base_curvature");
  for (int m = 0; m < kNumModes; ++m) p.base_curvature[m] = base.at(0, m);
  p.curvature_weights = a.tensor("planner.curv_w");
  p.curvature_bias = a.tensor("planner.curv_b");
  p.speed_weights = a.tensor("planner.speed_w");
  p.speed_bias = a.tensor("planner.speed_b");
  p.stage = a.field("stage");
  p.fit_steps = std::stol(a.field("fit_steps"));
  if (config_hash_out) *config_hash_out = a.field("config_hash");
  return p;
}

namespace {

// Matched lanelet for feature extraction: same nearest-centerline rule the
// command inference uses, ties to the smaller index.
int match_lanelet(const Vec2& ego, const std::vector<Polyline>& lanelets) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < lanelets.size(); ++i) {
    if (lanelets[i].size() < 2) continue;
    const Projection proj = project_onto(lanelets[i], ego);
    if (proj.dist2 < best_d2) {
      best_d2 = proj.dist2;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

std::vector<double> ego_descriptors(const Scene& scene, const PlannerConfig& config) {
  const Polyline& h = scene.history;
  if (h.size() < 2) {
    throw UsageError("extract_ego_feature: degenerate history (< 2 points)");
  }
  const size_t n = h.size();
  const double dt = kStepSeconds;

  const double current_speed = distance(h[n - 2], h[n - 1]) / dt;
  const double mean_speed = mean_history_speed(h);
  const double last_dx = h[n - 1].x - h[n - 2].x;
  const double last_dy = h[n - 1].y - h[n - 2].y;

  double heading_rate = 0.0;
  if (n >= 3) {
    const double h1 = std::atan2(h[n - 2].y - h[n - 3].y, h[n - 2].x - h[n - 3].x);
    const double h2 = std::atan2(h[n - 1].y - h[n - 2].y, h[n - 1].x - h[n - 2].x);
    heading_rate = wrap_angle(h2 - h1) / dt;
  }
  const double curvature_estimate = heading_rate / std::max(current_speed, 0.5);

  // Speed-scale entries are conditioned to O(1) so the projected feature has
  // comparable variance per dimension.
  constexpr double kSpeedScale = 0.2;
  std::vector<double> raw{current_speed * kSpeedScale,
                          mean_speed * kSpeedScale,
                          heading_rate,
                          last_dx * kSpeedScale,
                          last_dy * kSpeedScale,
                          curvature_estimate};

  // Heading-change profile of the matched centerline at the lookahead
  // stations. Zeros when no lanelet is usable.
  const int lane_idx = match_lanelet(h.back(), scene.lanelets);
  if (lane_idx >= 0) {
    const Polyline& lane = scene.lanelets[lane_idx];
    const std::vector<double> cum = cumulative_lengths(lane);
    const Projection proj = project_onto(lane, h.back());
    for (double station : config.feature_stations) {
      raw.push_back(heading_change(lane, cum, proj.arc_length, station));
    }
  } else {
    for (size_t i = 0; i < config.feature_stations.size(); ++i) raw.push_back(0.0);
  }
  raw.push_back(1.0);  // constant
  return raw;
}

EgoFeature extract_ego_feature(const Scene& scene, const PlannerConfig& config) {
  config.validate();
  std::vector<double> raw = ego_descriptors(scene, config);

  // Fixed random projection to D_e; frozen by seed, never trained.
  const int raw_dim = static_cast<int>(raw.size());
  Rng rng = Rng::fork(config.feature_seed, static_cast<uint64_t>(raw_dim));
  Matrix projection =
      Matrix::gaussian(raw_dim, config.feature_dim, 1.0 / std::sqrt(raw_dim), rng);
  EgoFeature e = matmul(Matrix::row_vector(std::move(raw)), projection);
  if (!e.all_finite()) throw UsageError("extract_ego_feature: non-finite feature");
  return e;
}

ModeControls decode_controls(const EgoFeature& e, const PlannerParams& params) {
  const Matrix curv = add(matmul(e, params.curvature_weights), params.curvature_bias);
  const Matrix spd = add(matmul(e, params.speed_weights), params.speed_bias);
  ModeControls out{};
  for (int m = 0; m < kNumModes; ++m) {
    out.curvature[m] = params.base_curvature[m] + kCurvatureReadoutScale * curv.at(0, m);
  }
  out.speed = spd.at(0, 0);
  return out;
}

ModeTrajectories decode_modes(const EgoFeature& e, const PlannerParams& params) {
  const ModeControls ctl = decode_controls(e, params);
  ModeTrajectories modes;
  for (int m = 0; m < kNumModes; ++m) {
    modes[m].reserve(kHorizonSteps);
    for (int k = 1; k <= kHorizonSteps; ++k) {
      modes[m].push_back(arc_point(ctl.curvature[m], ctl.speed * k * kStepSeconds));
    }
  }
  return modes;
}

const Polyline& select_mode(const ModeTrajectories& modes, const Command& c) {
  return modes[static_cast<size_t>(c.index())];
}

PlannerParams fit_unconditional(const PlannerParams& init, const std::vector<Scene>& scenes,
                                const PlannerConfig& config, const FitConfig& fit) {
  if (fit.steps <= 0) return init;
  if (scenes.empty()) throw UsageError("fit_unconditional: empty dataset");
  if (fit.batch_size <= 0) throw ConfigError("fit_unconditional: batch_size must be > 0");

  std::vector<double> wt = fit.step_weights;
  if (wt.empty()) wt.assign(kHorizonSteps, 1.0);
  if (static_cast<int>(wt.size()) != kHorizonSteps) {
    throw ConfigError("fit_unconditional: step_weights must have one entry per waypoint");
  }
  const Matrix weights = loss_weight_row(wt, fit.endpoint_weight);

  // Frozen per-scene context.
  struct Sample {
    EgoFeature e;
    Command lanelet_cmd;
    Matrix target;  // 1 x 24
  };
  std::vector<Sample> samples;
  samples.reserve(scenes.size());
  for (const Scene& s : scenes) {
    Sample smp;
    smp.e = extract_ego_feature(s, config);
    smp.lanelet_cmd = infer_lanelet_command(s.history, s.lanelets, config.command_rule);
    smp.target = trajectory_to_row(s.future);
    samples.push_back(std::move(smp));
  }

  ParamSet params;
  Parameter& curv_w = params.add("planner.curv_w", init.curvature_weights);
  Parameter& curv_b = params.add("planner.curv_b", init.curvature_bias);
  Parameter& speed_w = params.add("planner.speed_w", init.speed_weights);
  Parameter& speed_b = params.add("planner.speed_b", init.speed_bias);
  Matrix base(1, kNumModes);
  for (int m = 0; m < kNumModes; ++m) base.at(0, m) = init.base_curvature[m];

  OptimConfig ocfg;
  ocfg.base_lr = fit.base_lr;
  ocfg.beta1 = fit.beta1;
  ocfg.beta2 = fit.beta2;
  ocfg.eps = fit.eps;
  ocfg.weight_decay = fit.weight_decay;
  ocfg.total_steps = fit.steps;
  AdamW optim(ocfg);
  std::vector<Parameter*> plist = params.all();

  const int n = static_cast<int>(samples.size());
  long steps_done = 0;
  for (long epoch = 0; steps_done < fit.steps; ++epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng = Rng::fork(fit.seed ^ 0x8ae8d159f9b087a1ULL, static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.next_int(i + 1)]);
    }
    for (int start = 0; start < n && steps_done < fit.steps; start += fit.batch_size) {
      const int end = std::min(n, start + fit.batch_size);
      params.zero_grads();
      double batch_loss = 0.0;
      for (int bi = start; bi < end; ++bi) {
        const int idx = order[bi];
        const Sample& smp = samples[idx];
        Rng cmd_rng = Rng::fork(fit.seed ^ 0xc2b2ae3d27d4eb4fULL,
                                static_cast<uint64_t>(epoch) * 0x9e3779b97f4a7c15ULL +
                                    static_cast<uint64_t>(scenes[idx].id));
        const Command c = perturb_command(smp.lanelet_cmd, fit.regime, cmd_rng);
        const int mode = c.index();

        GradTape tape;
        const int e_node = tape.leaf(smp.e, false);
        const int cw = tape.leaf(curv_w.value, true);
        const int cb = tape.leaf(curv_b.value, true);
        const int sw = tape.leaf(speed_w.value, true);
        const int sb = tape.leaf(speed_b.value, true);
        const int base_node = tape.leaf(base, false);
        const int readout_scale =
            tape.leaf(Matrix::full(1, kNumModes, kCurvatureReadoutScale), false);
        const int readout = tape.mul(tape.add(tape.matmul(e_node, cw), cb), readout_scale);
        const int curv_all = tape.add(readout, base_node);
        const int kappa = tape.slice_cols(curv_all, mode, 1);
        const int speed = tape.add(tape.matmul(e_node, sw), sb);
        const int roll = tape.arc_rollout(kappa, speed, kHorizonSteps, kStepSeconds);
        const int loss = tape.weighted_l1(roll, smp.target, weights);
        tape.backward(loss);
        batch_loss += tape.value(loss).data[0];

        const double inv = 1.0 / (end - start);
        auto pull = [&](Parameter& p, int node) {
          if (!tape.has_grad(node)) return;
          const Matrix& g = tape.grad(node);
          for (size_t i2 = 0; i2 < p.grad.data.size(); ++i2) {
            p.grad.data[i2] += inv * g.data[i2];
          }
        };
        pull(curv_w, cw);
        pull(curv_b, cb);
        pull(speed_w, sw);
        pull(speed_b, sb);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("fit_unconditional: non-finite loss at step " +
                            std::to_string(steps_done));
      }
      optim.step(plist);
      ++steps_done;
    }
  }

  PlannerParams out = init;
  out.curvature_weights = curv_w.value;
  out.curvature_bias = curv_b.value;
  out.speed_weights = speed_w.value;
  out.speed_bias = speed_b.value;
  out.fit_steps = init.fit_steps + steps_done;
  return out;
}

}  // namespace nudge
