#include "nudge/config.hpp"

#include <fstream>
#include <set>

#include "nudge/io.hpp"

namespace nudge {

using json = nlohmann::json;

void DatasetConfig::validate() const {
  if (n_train <= 0) throw ConfigError("dataset.n_train must be > 0");
  if (n_val <= 0) throw ConfigError("dataset.n_val must be > 0");
  generator.validate();
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
  if (init_budget_fraction < 0.0 || init_budget_fraction > 1.0) {
    throw ConfigError("planner.init_budget_fraction must be in [0, 1]");
  }
  dataset.validate();
  planner.validate();
  adapter.validate();
  train.validate();
  eval.override_rule.validate();
  if (adapter.ego_dim != planner.feature_dim) {
    throw ConfigError("adapter.ego_dim must equal planner.feature_dim");
  }
}

namespace {

class StrictObject {
 public:
  StrictObject(const json& j, const std::string& where) : j_(j), where_(where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
  }

  ~StrictObject() = default;

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& child(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void parse_generator(const json& j, GeneratorConfig& g) {
  StrictObject o(j, "dataset");
  int n_dummy = 0;
  (void)n_dummy;
  o.read("n_train", n_dummy);  // consumed by the caller
  o.read("n_val", n_dummy);
  o.read("speed_min", g.speed_min);
  o.read("speed_max", g.speed_max);
  o.read("stop_speed_min", g.stop_speed_min);
  o.read("stop_speed_max", g.stop_speed_max);
  o.read("curvature_min", g.curvature_min);
  o.read("curvature_max", g.curvature_max);
  o.read("turn_onset_min", g.turn_onset_min);
  o.read("turn_onset_max", g.turn_onset_max);
  o.read("turn_angle_min_deg", g.turn_angle_min_deg);
  o.read("turn_angle_max_deg", g.turn_angle_max_deg);
  o.read("lateral_accel_max", g.lateral_accel_max);
  o.read("stop_time_min", g.stop_time_min);
  o.read("stop_time_max", g.stop_time_max);
  o.read("noise_sigma", g.noise_sigma);
  o.read("filler_fraction", g.filler_fraction);
  o.read("maneuver_mix", g.maneuver_mix);
  o.read("lanelet_spacing", g.lanelet_spacing);
  o.read("lanelet_behind", g.lanelet_behind);
  o.read("lanelet_ahead", g.lanelet_ahead);
  o.read("max_distractors", g.max_distractors);
  o.read("distractor_offset", g.distractor_offset);
  o.finish();
}

json generator_to_json(const DatasetConfig& d) {
  const GeneratorConfig& g = d.generator;
  json j;
  j["n_train"] = d.n_train;
  j["n_val"] = d.n_val;
  j["speed_min"] = g.speed_min;
  j["speed_max"] = g.speed_max;
  j["stop_speed_min"] = g.stop_speed_min;
  j["stop_speed_max"] = g.stop_speed_max;
  j["curvature_min"] = g.curvature_min;
  j["curvature_max"] = g.curvature_max;
  j["turn_onset_min"] = g.turn_onset_min;
  j["turn_onset_max"] = g.turn_onset_max;
  j["turn_angle_min_deg"] = g.turn_angle_min_deg;
  j["turn_angle_max_deg"] = g.turn_angle_max_deg;
  j["lateral_accel_max"] = g.lateral_accel_max;
  j["stop_time_min"] = g.stop_time_min;
  j["stop_time_max"] = g.stop_time_max;
  j["noise_sigma"] = g.noise_sigma;
  j["filler_fraction"] = g.filler_fraction;
  j["maneuver_mix"] = g.maneuver_mix;
  j["lanelet_spacing"] = g.lanelet_spacing;
  j["lanelet_behind"] = g.lanelet_behind;
  j["lanelet_ahead"] = g.lanelet_ahead;
  j["max_distractors"] = g.max_distractors;
  j["distractor_offset"] = g.distractor_offset;
  return j;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictObject root(j, "config");
  root.read("seed", c.seed);
  root.read("out_dir", c.out_dir);

  if (root.has("dataset")) {
    const json& dj = root.child("dataset");
    parse_generator(dj, c.dataset.generator);
    StrictObject d(dj, "dataset");
    d.read("n_train", c.dataset.n_train);
    d.read("n_val", c.dataset.n_val);
    // parse_generator already did the unknown-key check
  }

  if (root.has("command")) {
    StrictObject o(root.child("command"), "command");
    o.read("lookahead_m", c.planner.command_rule.lookahead);
    o.read("threshold_deg", c.planner.command_rule.threshold_deg);
    o.finish();
  }

  if (root.has("planner")) {
    StrictObject o(root.child("planner"), "planner");
    o.read("feature_dim", c.planner.feature_dim);
    o.read("feature_seed", c.planner.feature_seed);
    o.read("feature_stations", c.planner.feature_stations);
    o.read("base_curvature", c.planner.base_curvature);
    o.read("default_speed", c.planner.default_speed);
    o.read("init_budget_fraction", c.init_budget_fraction);
    o.finish();
    c.adapter.ego_dim = c.planner.feature_dim;
  }

  if (root.has("text")) {
    StrictObject o(root.child("text"), "text");
    o.read("vocab", c.adapter.text.vocab);
    o.read("seq_len", c.adapter.text.seq_len);
    o.read("d_t", c.adapter.text.d_t);
    o.read("rank", c.adapter.text.rank);
    o.read("embed_seed", c.adapter.text.embed_seed);
    o.finish();
  }

  if (root.has("adapter")) {
    StrictObject o(root.child("adapter"), "adapter");
    std::string variant = to_string(c.adapter.variant);
    o.read("variant", variant);
    c.adapter.variant = variant_from_string(variant);
    o.read("hidden_plain", c.adapter.hidden_plain);
    o.read("hidden_large", c.adapter.hidden_large);
    o.read("hidden_film", c.adapter.hidden_film);
    o.finish();
    c.train.variant = c.adapter.variant;
  }

  if (root.has("train")) {
    StrictObject o(root.child("train"), "train");
    o.read("epochs", c.train.epochs);
    o.read("base_lr", c.train.base_lr);
    o.read("fit_base_lr", c.train.fit_base_lr);
    o.read("batch_size", c.train.batch_size);
    o.read("beta1", c.train.beta1);
    o.read("beta2", c.train.beta2);
    o.read("adam_eps", c.train.adam_eps);
    o.read("weight_decay", c.train.weight_decay);
    o.read("step_weights", c.train.step_weights);
    o.read("endpoint_weight", c.train.endpoint_weight);
    std::string regime = to_string(c.train.regime);
    o.read("regime", regime);
    c.train.regime = regime_from_string(regime);
    o.read("checkpoint_every", c.train.checkpoint_every);
    o.finish();
  }
  c.train.seed = c.seed;

  if (root.has("eval")) {
    StrictObject o(root.child("eval"), "eval");
    o.read("eval_seed", c.eval.eval_seed);
    o.read("stop_override", c.eval.stop_override);
    o.read("dump_trajectories", c.eval.dump_trajectories);
    o.read("hard_stop", c.eval.override_rule.hard_stop);
    o.read("conflict_verbs", c.eval.override_rule.conflict_verbs);
    o.read("conflict_nouns", c.eval.override_rule.conflict_nouns);
    o.read("max_words", c.eval.override_rule.max_words);
    o.read("max_mean_speed", c.eval.override_rule.max_mean_speed);
    std::string mode =
        c.eval.override_rule.mode == OverrideRuleConfig::Mode::kHold ? "hold" : "decel-ramp";
    o.read("override_mode", mode);
    if (mode == "hold") {
      c.eval.override_rule.mode = OverrideRuleConfig::Mode::kHold;
    } else if (mode == "decel-ramp") {
      c.eval.override_rule.mode = OverrideRuleConfig::Mode::kDecelRamp;
    } else {
      throw ConfigError("eval.override_mode: expected hold|decel-ramp");
    }
    o.read("ramp_seconds", c.eval.override_rule.ramp_seconds);
    o.finish();
  }

  root.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["dataset"] = generator_to_json(c.dataset);
  j["command"] = {{"lookahead_m", c.planner.command_rule.lookahead},
                  {"threshold_deg", c.planner.command_rule.threshold_deg}};
  j["planner"] = {{"feature_dim", c.planner.feature_dim},
                  {"feature_seed", c.planner.feature_seed},
                  {"feature_stations", c.planner.feature_stations},
                  {"base_curvature", c.planner.base_curvature},
                  {"default_speed", c.planner.default_speed},
                  {"init_budget_fraction", c.init_budget_fraction}};
  j["text"] = {{"vocab", c.adapter.text.vocab},
               {"seq_len", c.adapter.text.seq_len},
               {"d_t", c.adapter.text.d_t},
               {"rank", c.adapter.text.rank},
               {"embed_seed", c.adapter.text.embed_seed}};
  j["adapter"] = {{"variant", to_string(c.adapter.variant)},
                  {"hidden_plain", c.adapter.hidden_plain},
                  {"hidden_large", c.adapter.hidden_large},
                  {"hidden_film", c.adapter.hidden_film}};
  j["train"] = {{"epochs", c.train.epochs},
                {"base_lr", c.train.base_lr},
                {"fit_base_lr", c.train.fit_base_lr},
                {"batch_size", c.train.batch_size},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"adam_eps", c.train.adam_eps},
                {"weight_decay", c.train.weight_decay},
                {"step_weights", c.train.step_weights},
                {"endpoint_weight", c.train.endpoint_weight},
                {"regime", to_string(c.train.regime)},
                {"checkpoint_every", c.train.checkpoint_every}};
  j["eval"] = {{"eval_seed", c.eval.eval_seed},
               {"stop_override", c.eval.stop_override},
               {"dump_trajectories", c.eval.dump_trajectories},
               {"hard_stop", c.eval.override_rule.hard_stop},
               {"conflict_verbs", c.eval.override_rule.conflict_verbs},
               {"conflict_nouns", c.eval.override_rule.conflict_nouns},
               {"max_words", c.eval.override_rule.max_words},
               {"max_mean_speed", c.eval.override_rule.max_mean_speed},
               {"override_mode",
                c.eval.override_rule.mode == OverrideRuleConfig::Mode::kHold ? "hold"
                                                                             : "decel-ramp"},
               {"ramp_seconds", c.eval.override_rule.ramp_seconds}};
  return j;
}

std::string config_hash(const RunConfig& config) {
  // out_dir is a workspace path, not an experiment knob; two runs into
  // different directories with the same science must hash alike.
  json j = run_config_to_json(config);
  j.erase("out_dir");
  const std::string dump = j.dump();
  return hash_to_hex(fnv1a64(dump.data(), dump.size()));
}

void apply_override(json& j, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &j;
  size_t begin = 0;
  while (true) {
    const size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw ConfigError("override has an empty key segment: " + assignment);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

}  // namespace nudge
