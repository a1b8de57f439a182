#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "nudge/matrix.hpp"
#include "nudge/optim.hpp"
#include "nudge/scene.hpp"
#include "nudge/scenegen.hpp"

namespace nudge {

constexpr int kEgoFeatureDim = 32;  // D_e
constexpr int kNumModes = 3;        // {left, straight, right}

/// The curvature readout is expressed in units of this scale so its weights
/// live on the same O(1) footing as the speed readout; one optimizer step
/// size then serves both groups.
constexpr double kCurvatureReadoutScale = 0.02;

struct PlannerConfig {
  int feature_dim = kEgoFeatureDim;
  uint64_t feature_seed = 0x5eed0f00dULL;  // fixes the random projection
  // Lookahead stations (meters) for the matched-centerline heading profile.
  std::vector<double> feature_stations{1.0, 2.0, 3.0, 4.0, 5.0};
  double base_curvature = 0.08;  // left mode +, right mode -
  double default_speed = 5.0;    // stage-1 analytic rollout speed
  CommandRuleConfig command_rule;

  void validate() const;
};

/// Frozen ego planning feature (1 x D_e). Derived from history and the
/// matched lanelet only; never from the future.
using EgoFeature = Matrix;

using ModeTrajectories = std::array<Polyline, kNumModes>;

/// Frozen decoder weights. The per-mode trajectory is a constant-curvature,
/// constant-speed rollout with curvature base[m] + readout_m(e) and shared
/// speed readout. Stage "stage1" has zero readouts (analytic prior); "init"
/// and "ft" are produced by fit_unconditional and then frozen.
struct PlannerParams {
  std::array<double, kNumModes> base_curvature{0.08, 0.0, -0.08};
  Matrix curvature_weights;  // D_e x 3
  Matrix curvature_bias;     // 1 x 3
  Matrix speed_weights;      // D_e x 1
  Matrix speed_bias;         // 1 x 1
  std::string stage = "stage1";
  long fit_steps = 0;  // cumulative optimizer steps this checkpoint has seen

  static PlannerParams stage1(const PlannerConfig& config);
  /// Fingerprint of all tensors; used to verify frozenness across training.
  uint64_t hash() const;
};

void save_planner(const std::string& path, const PlannerParams& params,
                  const std::string& config_hash);
PlannerParams load_planner(const std::string& path, std::string* config_hash_out = nullptr);

/// Raw handcrafted descriptors before projection: current speed, mean speed,
/// heading rate, last-step displacement, curvature estimate, then the
/// matched-centerline heading-change profile at the lookahead stations, then
/// a constant. Exposed for tests.
std::vector<double> ego_descriptors(const Scene& scene, const PlannerConfig& config);

/// Handcrafted history descriptors + matched-centerline heading profile,
/// mixed by a fixed random projection to D_e. Throws UsageError on a
/// degenerate (< 2 point) history.
EgoFeature extract_ego_feature(const Scene& scene, const PlannerConfig& config);

/// Three command-conditioned rollouts at 2 Hz over the 6 s horizon.
ModeTrajectories decode_modes(const EgoFeature& e, const PlannerParams& params);

/// Per-mode (curvature, speed) the decoder rolls out; exposed for the
/// unconditional fit and for diagnostics.
struct ModeControls {
  std::array<double, kNumModes> curvature;
  double speed;
};
ModeControls decode_controls(const EgoFeature& e, const PlannerParams& params);

/// Row of the mode stack selected by a one-hot command.
const Polyline& select_mode(const ModeTrajectories& modes, const Command& c);

struct FitConfig {
  long steps = 0;  // optimizer steps; 0 returns the initial params unchanged
  int batch_size = 32;
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::vector<double> step_weights;  // defaults to all-ones over the horizon
  double endpoint_weight = 0.5;
  Regime regime = Regime::kReliable;
  uint64_t seed = 1;
};

/// Fits only the readout weights (curvature per mode, shared speed) on the
/// training split with the weighted L1 loss on the regime-selected mode.
/// The planner structure and base curvatures stay fixed; the result is
/// frozen by the caller. Gradients flow through the rollout tape op.
PlannerParams fit_unconditional(const PlannerParams& init, const std::vector<Scene>& scenes,
                                const PlannerConfig& config, const FitConfig& fit);

}  // namespace nudge
