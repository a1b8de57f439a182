#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nudge/adapter.hpp"
#include "nudge/loss.hpp"
#include "nudge/planner.hpp"
#include "nudge/scenegen.hpp"

namespace nudge {

struct TrainConfig {
  int epochs = 60;
  double base_lr = 1e-4;
  // The planner readout fits (the under-trained and compute-matched
  // unconditional baselines) run at their own rate; their parameters live on
  // a different scale than the adapter's. Step budgets stay matched.
  double fit_base_lr = 1e-2;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::vector<double> step_weights = std::vector<double>(kHorizonSteps, 1.0);  // w_t
  double endpoint_weight = 0.5;                                                // lambda_end
  Regime regime = Regime::kReliable;
  uint64_t seed = 1;
  Variant variant = Variant::kFilm;
  int checkpoint_every = 0;  // epochs between mid-run checkpoints; 0 disables

  long total_steps(size_t n_scenes) const;
  void validate() const;
};

/// Everything needed to resume bit-exactly: adapter tensors, optimizer
/// moments, counters, and the configuration fingerprint. Per-epoch RNG streams
/// are derived from (seed, epoch), so the epoch counter pins the data order
/// and command draws of the remaining epochs.
struct Checkpoint {
  Adapter adapter;
  Regime regime = Regime::kReliable;
  Variant variant = Variant::kFilm;
  uint64_t seed = 0;
  int epochs_done = 0;
  long adam_step = 0;
  uint64_t theta_hash = 0;
  std::string config_hash;
  std::vector<std::pair<std::string, std::pair<Matrix, Matrix>>> moments;  // name -> (m, v)

  explicit Checkpoint(Adapter a) : adapter(std::move(a)) {}

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path, const AdapterConfig& config);
  uint64_t content_hash() const;
};

struct TrainLogRow {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_ade = -1.0;  // -1 when no validation split is wired in
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

/// Per-scene, per-epoch command stream; also used by fit_unconditional so the
/// unconditional baseline sees the same regime protocol.
Rng training_command_rng(uint64_t seed, long epoch, int64_t scene_id);

/// Trains only the adapter parameters against the frozen planner. Per batch:
/// regime command draw, forward with text, weighted L1 on the selected mode,
/// backward, AdamW on the adapter tensors. No other loss term exists. The
/// checkpoint hook fires every checkpoint_every epochs when enabled.
TrainResult train_adapter(
    const std::vector<Scene>& train_scenes, const std::vector<Scene>& val_scenes,
    const PlannerParams& theta, const PlannerConfig& planner_config, const TrainConfig& config,
    const Checkpoint* resume_from = nullptr,
    const std::function<void(const Checkpoint&)>& checkpoint_hook = nullptr);

/// The three frozen planner checkpoints: the analytic zero-readout planner,
/// a deliberately under-trained fit, and the compute-matched unconditional
/// fine-tune (exactly the adapter's step budget, continuing from the
/// under-trained fit).
struct BaselineBundle {
  PlannerParams stage1;
  PlannerParams init;
  PlannerParams ft;
};
BaselineBundle train_baselines(const std::vector<Scene>& train_scenes,
                               const PlannerConfig& planner_config, const TrainConfig& config,
                               double init_budget_fraction);

}  // namespace nudge
