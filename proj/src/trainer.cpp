#include "nudge/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "nudge/evaluator.hpp"
#include "nudge/io.hpp"

namespace nudge {

long TrainConfig::total_steps(size_t n_scenes) const {
  const long batches =
      static_cast<long>((n_scenes + static_cast<size_t>(batch_size) - 1) / batch_size);
  return static_cast<long>(epochs) * batches;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be > 0");
  if (!(base_lr > 0.0)) throw ConfigError("train: base_lr must be > 0");
  if (static_cast<int>(step_weights.size()) != kHorizonSteps) {
    throw ConfigError("train: step_weights must have one entry per waypoint");
  }
  for (double w : step_weights) {
    if (!(w > 0.0)) throw ConfigError("train: step_weights must be positive");
  }
  if (endpoint_weight < 0.0) throw ConfigError("train: endpoint_weight must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
}

Rng training_command_rng(uint64_t seed, long epoch, int64_t scene_id) {
  return Rng::fork(seed ^ 0xc2b2ae3d27d4eb4fULL,
                   static_cast<uint64_t>(epoch) * 0x9e3779b97f4a7c15ULL +
                       static_cast<uint64_t>(scene_id));
}

void Checkpoint::save(const std::string& path) const {
  TextArchive a;
  a.set_field("kind", "adapter-checkpoint");
  a.set_field("config_hash", config_hash);
  a.set_field("variant", to_string(variant));
  a.set_field("regime", to_string(regime));
  a.set_field("seed", std::to_string(seed));
  a.set_field("epochs_done", std::to_string(epochs_done));
  a.set_field("adam_step", std::to_string(adam_step));
  a.set_field("theta_hash", hash_to_hex(theta_hash));
  adapter.tensors_to_archive(a);
  for (const auto& [name, mv] : moments) {
    a.add_tensor("optim.m." + name, mv.first);
    a.add_tensor("optim.v." + name, mv.second);
  }
  a.save(path);
}

Checkpoint Checkpoint::load(const std::string& path, const AdapterConfig& config) {
  const TextArchive a = TextArchive::load(path);
  if (a.field("kind") != "adapter-checkpoint") {
    throw ParseError(path + ": not an adapter checkpoint");
  }
  const Variant variant = variant_from_string(a.field("variant"));
  if (variant != config.variant) {
    throw ParseError(path + ": checkpoint variant " + a.field("variant") +
                     " does not match configured variant " + to_string(config.variant));
  }
  Checkpoint ckpt(Adapter::from_archive(config, a));
  ckpt.variant = variant;
  ckpt.regime = regime_from_string(a.field("regime"));
  ckpt.seed = std::stoull(a.field("seed"));
  ckpt.epochs_done = std::stoi(a.field("epochs_done"));
  ckpt.adam_step = std::stol(a.field("adam_step"));
  ckpt.theta_hash = std::stoull(a.field("theta_hash"), nullptr, 16);
  ckpt.config_hash = a.field("config_hash");
  // Moments are stored sorted by parameter name; keep the archive order so a
  // save/load cycle is byte-stable.
  for (const auto& [name, tensor] : a.tensors()) {
    if (name.rfind("optim.m.", 0) == 0) {
      const std::string param = name.substr(8);
      ckpt.moments.emplace_back(param,
                                std::make_pair(tensor, a.tensor("optim.v." + param)));
    }
  }
  return ckpt;
}

uint64_t Checkpoint::content_hash() const {
  TextArchive a;
  a.set_field("kind", "adapter-checkpoint");
  a.set_field("config_hash", config_hash);
  a.set_field("variant", to_string(variant));
  a.set_field("regime", to_string(regime));
  a.set_field("seed", std::to_string(seed));
  a.set_field("epochs_done", std::to_string(epochs_done));
  a.set_field("adam_step", std::to_string(adam_step));
  a.set_field("theta_hash", hash_to_hex(theta_hash));
  adapter.tensors_to_archive(a);
  for (const auto& [name, mv] : moments) {
    a.add_tensor("optim.m." + name, mv.first);
    a.add_tensor("optim.v." + name, mv.second);
  }
  return a.content_hash();
}

TrainResult train_adapter(const std::vector<Scene>& train_scenes,
                          const std::vector<Scene>& val_scenes, const PlannerParams& theta,
                          const PlannerConfig& planner_config, const TrainConfig& config,
                          const Checkpoint* resume_from,
                          const std::function<void(const Checkpoint&)>& checkpoint_hook) {
  config.validate();
  planner_config.validate();
  if (train_scenes.empty()) throw UsageError("train_adapter: empty training split");

  AdapterConfig adapter_config;
  adapter_config.variant = config.variant;
  adapter_config.ego_dim = planner_config.feature_dim;

  const uint64_t theta_hash = theta.hash();

  // phi starts at the identity (exactly the frozen planner) unless resuming.
  Adapter adapter = resume_from ? resume_from->adapter
                                : Adapter::identity_init(adapter_config, config.seed);
  if (resume_from) {
    if (resume_from->variant != config.variant || resume_from->regime != config.regime ||
        resume_from->seed != config.seed) {
      throw UsageError("train_adapter: resume checkpoint does not match the configuration");
    }
    if (resume_from->theta_hash != theta_hash) {
      throw UsageError("train_adapter: resume checkpoint was trained against a different planner");
    }
  }

  // Frozen per-scene context: features, mode stacks, targets, lanelet commands.
  struct Sample {
    EgoFeature e;
    ModeTrajectories base;
    Command lanelet_cmd;
    Matrix target;
  };
  const int n = static_cast<int>(train_scenes.size());
  std::vector<Sample> samples;
  samples.reserve(n);
  for (const Scene& s : train_scenes) {
    Sample smp;
    smp.e = extract_ego_feature(s, planner_config);
    smp.base = decode_modes(smp.e, theta);
    smp.lanelet_cmd = infer_lanelet_command(s.history, s.lanelets, planner_config.command_rule);
    smp.target = trajectory_to_row(s.future);
    samples.push_back(std::move(smp));
  }
  const Matrix weights = loss_weight_row(config.step_weights, config.endpoint_weight);

  OptimConfig ocfg;
  ocfg.base_lr = config.base_lr;
  ocfg.beta1 = config.beta1;
  ocfg.beta2 = config.beta2;
  ocfg.eps = config.adam_eps;
  ocfg.weight_decay = config.weight_decay;
  ocfg.total_steps = config.total_steps(train_scenes.size());
  AdamW optim(ocfg);
  if (resume_from) {
    optim.restore_step(resume_from->adam_step);
    for (const auto& [name, mv] : resume_from->moments) {
      optim.restore(resume_from->adam_step, name, mv.first, mv.second);
    }
  }
  std::vector<Parameter*> plist = adapter.params().all();

  TrainResult result{Checkpoint(std::move(adapter)), {}};
  Adapter& model = result.checkpoint.adapter;

  auto fill_checkpoint_meta = [&](int epochs_done) {
    result.checkpoint.regime = config.regime;
    result.checkpoint.variant = config.variant;
    result.checkpoint.seed = config.seed;
    result.checkpoint.epochs_done = epochs_done;
    result.checkpoint.adam_step = optim.step_count();
    result.checkpoint.theta_hash = theta_hash;
    result.checkpoint.moments.clear();
    for (const auto& entry : optim.moments()) {
      result.checkpoint.moments.emplace_back(entry.name,
                                             std::make_pair(*entry.first, *entry.second));
    }
  };

  const int first_epoch = resume_from ? resume_from->epochs_done : 0;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng = Rng::fork(config.seed ^ 0x8ae8d159f9b087a1ULL, static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.next_int(i + 1)]);
    }

    double epoch_loss = 0.0;
    const double lr_at_epoch_start = optim.current_lr();
    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(n, start + config.batch_size);
      model.params().zero_grads();
      double batch_loss = 0.0;
      for (int bi = start; bi < end; ++bi) {
        const int idx = order[bi];
        const Scene& scene = train_scenes[idx];
        const Sample& smp = samples[idx];
        Rng cmd_rng = training_command_rng(config.seed, epoch, scene.id);
        const Command c = perturb_command(smp.lanelet_cmd, config.regime, cmd_rng);

        Adapter::Forward fwd = model.forward(smp.e, smp.base, c, scene.instruction);
        const int loss_node = fwd.tape.weighted_l1(fwd.pred_node, smp.target, weights);
        const double loss = fwd.tape.value(loss_node).data[0];
        if (!std::isfinite(loss)) {
          throw TrainingError("train_adapter: non-finite loss at epoch " + std::to_string(epoch) +
                              ", scene " + std::to_string(scene.id));
        }
        batch_loss += loss;
        fwd.tape.backward(loss_node);
        model.accumulate_grads(fwd, 1.0 / (end - start));
      }
      optim.step(plist);
      epoch_loss += batch_loss;
    }

    TrainLogRow row;
    row.epoch = epoch + 1;
    row.lr = lr_at_epoch_start;
    row.train_loss = epoch_loss / n;
    if (!val_scenes.empty()) {
      double total = 0.0;
      for (const Scene& s : val_scenes) {
        const EgoFeature e = extract_ego_feature(s, planner_config);
        const ModeTrajectories base = decode_modes(e, theta);
        const Command lanelet = infer_lanelet_command(s.history, s.lanelets,
                                                      planner_config.command_rule);
        Rng cmd_rng = Rng::fork(config.seed ^ 0x0e7a1d00ULL, static_cast<uint64_t>(s.id));
        const Command c = perturb_command(lanelet, config.regime, cmd_rng);
        Adapter::Forward fwd = model.forward(e, base, c, s.instruction);
        total += ade(fwd.selected, s.future);
      }
      row.val_ade = total / static_cast<double>(val_scenes.size());
    }
    result.log.push_back(row);

    if (config.checkpoint_every > 0 && checkpoint_hook &&
        (epoch + 1) % config.checkpoint_every == 0 && epoch + 1 < config.epochs) {
      fill_checkpoint_meta(epoch + 1);
      checkpoint_hook(result.checkpoint);
    }
  }

  fill_checkpoint_meta(config.epochs);
  return result;
}

BaselineBundle train_baselines(const std::vector<Scene>& train_scenes,
                               const PlannerConfig& planner_config, const TrainConfig& config,
                               double init_budget_fraction) {
  if (init_budget_fraction < 0.0 || init_budget_fraction > 1.0) {
    throw ConfigError("train_baselines: init_budget_fraction must be in [0, 1]");
  }
  BaselineBundle bundle{PlannerParams::stage1(planner_config), PlannerParams::stage1(planner_config),
                        PlannerParams::stage1(planner_config)};

  const long adapter_steps = config.total_steps(train_scenes.size());
  FitConfig fit;
  fit.batch_size = config.batch_size;
  fit.base_lr = config.fit_base_lr;
  fit.beta1 = config.beta1;
  fit.beta2 = config.beta2;
  fit.eps = config.adam_eps;
  fit.weight_decay = config.weight_decay;
  fit.step_weights = config.step_weights;
  fit.endpoint_weight = config.endpoint_weight;
  fit.regime = config.regime;

  // Deliberately under-trained checkpoint: a fraction of the full budget.
  fit.steps = static_cast<long>(std::lround(init_budget_fraction * adapter_steps));
  fit.seed = config.seed ^ 0x1717171717171717ULL;
  bundle.init = fit_unconditional(bundle.stage1, train_scenes, planner_config, fit);
  bundle.init.stage = "init";

  // Compute-matched unconditional fine-tune: continues from the under-trained
  // checkpoint for exactly the adapter's step budget.
  fit.steps = adapter_steps;
  fit.seed = config.seed ^ 0x2f2f2f2f2f2f2f2fULL;
  bundle.ft = fit_unconditional(bundle.init, train_scenes, planner_config, fit);
  bundle.ft.stage = "ft";
  return bundle;
}

}  // namespace nudge
