#include "nudge/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nudge/io.hpp"
#include "nudge/textenc.hpp"

namespace nudge {

using json = nlohmann::json;

namespace {

void check_pair(const Polyline& prediction, const Polyline& truth) {
  if (prediction.size() != truth.size() || prediction.empty()) {
    throw ShapeError("metrics: prediction/truth length mismatch");
  }
}

}  // namespace

double ade(const Polyline& prediction, const Polyline& truth) {
  check_pair(prediction, truth);
  double total = 0.0;
  for (size_t i = 0; i < prediction.size(); ++i) total += distance(prediction[i], truth[i]);
  return total / static_cast<double>(prediction.size());
}

double fde(const Polyline& prediction, const Polyline& truth) {
  check_pair(prediction, truth);
  return distance(prediction.back(), truth.back());
}

double a_at(const Polyline& prediction, const Polyline& truth, int k_seconds) {
  check_pair(prediction, truth);
  if (k_seconds < 1 || 2 * k_seconds > static_cast<int>(prediction.size())) {
    throw UsageError("a_at: horizon out of range");
  }
  const int n = 2 * k_seconds;  // 2 Hz
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += distance(prediction[i], truth[i]);
  return total / n;
}

void OverrideRuleConfig::validate() const {
  if (max_words <= 0) throw ConfigError("override: max_words must be > 0");
  if (max_mean_speed <= 0.0) throw ConfigError("override: max_mean_speed must be > 0");
  if (ramp_seconds <= 0.0) throw ConfigError("override: ramp_seconds must be > 0");
}

namespace {

// Contiguous word-sequence match, e.g. "pull over" or "stop sign".
bool contains_phrase(const std::vector<std::string>& words, const std::string& phrase) {
  const std::vector<std::string> target = split_words(phrase);
  if (target.empty() || target.size() > words.size()) return false;
  for (size_t i = 0; i + target.size() <= words.size(); ++i) {
    bool match = true;
    for (size_t j = 0; j < target.size(); ++j) {
      if (words[i + j] != target[j]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

Polyline hold_position_trajectory() { return Polyline(kHorizonSteps, Vec2{0.0, 0.0}); }

Polyline decel_ramp_trajectory(const Polyline& history, double ramp_seconds) {
  double v0 = 0.0;
  if (history.size() >= 2) {
    v0 = distance(history[history.size() - 2], history.back()) / kStepSeconds;
  }
  Polyline out(kHorizonSteps);
  for (int k = 1; k <= kHorizonSteps; ++k) {
    const double t = k * kStepSeconds;
    const double tc = std::min(t, ramp_seconds);
    out[k - 1] = {v0 * tc - v0 * tc * tc / (2.0 * ramp_seconds), 0.0};
  }
  return out;
}

}  // namespace

OverrideOutcome stop_override(const std::string& instruction, const Polyline& history,
                              const Polyline& prediction, const OverrideRuleConfig& rule) {
  rule.validate();
  OverrideOutcome out;
  out.trajectory = prediction;
  const std::vector<std::string> words = split_words(instruction);

  // Conflicting stop-related noun phrases are checked before the cue so that
  // "stop sign" never counts as a stop command.
  for (const std::string& noun : rule.conflict_nouns) {
    if (contains_phrase(words, noun)) {
      out.reason = "blocked: noun phrase '" + noun + "'";
      return out;
    }
  }
  for (const std::string& verb : rule.conflict_verbs) {
    if (contains_phrase(words, verb)) {
      out.reason = "blocked: action verb '" + verb + "'";
      return out;
    }
  }
  bool cue = false;
  for (const std::string& phrase : rule.hard_stop) {
    if (contains_phrase(words, phrase)) {
      cue = true;
      break;
    }
  }
  if (!cue) {
    out.reason = "no hard-stop cue";
    return out;
  }
  if (static_cast<int>(words.size()) > rule.max_words) {
    out.reason = "word count " + std::to_string(words.size()) + " > " +
                 std::to_string(rule.max_words);
    return out;
  }
  const double speed = mean_history_speed(history);
  if (speed > rule.max_mean_speed) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "history speed %.2f m/s > limit", speed);
    out.reason = buf;
    return out;
  }
  out.fired = true;
  out.reason = "fired: stop cue, no conflict, short text, slow history";
  out.trajectory = rule.mode == OverrideRuleConfig::Mode::kHold
                       ? hold_position_trajectory()
                       : decel_ramp_trajectory(history, rule.ramp_seconds);
  return out;
}

Command eval_command(const Scene& scene, const PlannerConfig& planner_config,
                     const EvalConfig& eval_config) {
  const Command lanelet =
      infer_lanelet_command(scene.history, scene.lanelets, planner_config.command_rule);
  Rng rng = Rng::fork(eval_config.eval_seed, static_cast<uint64_t>(scene.id));
  return perturb_command(lanelet, eval_config.regime, rng);
}

SceneOutput evaluate_scene(const MethodSpec& method, const Scene& scene,
                           const PlannerConfig& planner_config, const EvalConfig& eval_config) {
  if (!method.theta) throw ReportError("method " + method.name + ": missing planner checkpoint");
  SceneOutput out;
  out.command = eval_command(scene, planner_config, eval_config);
  const EgoFeature e = extract_ego_feature(scene, planner_config);
  out.base = decode_modes(e, *method.theta);
  if (method.adapter) {
    const std::optional<std::string> text =
        method.with_text ? std::optional<std::string>(scene.instruction) : std::nullopt;
    Adapter::Forward fwd = method.adapter->forward(e, out.base, out.command, text);
    out.selected = fwd.selected;
    out.residual = fwd.residual;
  } else {
    out.selected = select_mode(out.base, out.command);
    for (auto& r : out.residual) r.assign(kHorizonSteps, Vec2{0.0, 0.0});
  }
  if (method.use_override) {
    OverrideOutcome ov =
        stop_override(scene.instruction, scene.history, out.selected, eval_config.override_rule);
    out.selected = std::move(ov.trajectory);
    out.override_fired = ov.fired;
    out.override_reason = std::move(ov.reason);
  }
  return out;
}

MethodResult evaluate_method(const MethodSpec& method, const std::vector<Scene>& scenes,
                             const PlannerConfig& planner_config, const EvalConfig& eval_config) {
  if (scenes.empty()) throw UsageError("evaluate_method: empty dataset");
  MethodResult result;
  result.name = method.name;
  result.regime = eval_config.regime;
  double total_ade = 0.0;
  double total_fde = 0.0;
  std::array<double, 6> total_a{};
  for (const Scene& s : scenes) {
    const SceneOutput out = evaluate_scene(method, s, planner_config, eval_config);
    total_ade += ade(out.selected, s.future);
    total_fde += fde(out.selected, s.future);
    for (int k = 1; k <= 6; ++k) total_a[k - 1] += a_at(out.selected, s.future, k);
    SceneAudit audit;
    audit.scene_id = s.id;
    audit.command = out.command.index();
    audit.override_fired = out.override_fired;
    audit.override_reason = out.override_reason;
    result.audit.push_back(std::move(audit));
  }
  const double n = static_cast<double>(scenes.size());
  result.ade = total_ade / n;
  result.fde = total_fde / n;
  for (int i = 0; i < 6; ++i) result.a_at[i] = total_a[i] / n;
  if (method.adapter && method.compute_delta_ade) {
    result.delta_ade =
        delta_ade(*method.adapter, *method.theta, scenes, planner_config, eval_config);
  }
  return result;
}

double delta_ade(const Adapter& adapter, const PlannerParams& theta,
                 const std::vector<Scene>& scenes, const PlannerConfig& planner_config,
                 const EvalConfig& eval_config) {
  if (scenes.empty()) throw UsageError("delta_ade: empty dataset");
  MethodSpec with_text;
  with_text.name = "with-text";
  with_text.theta = &theta;
  with_text.adapter = &adapter;
  with_text.with_text = true;
  MethodSpec no_text = with_text;
  no_text.name = "no-text";
  no_text.with_text = false;

  double ade_with = 0.0;
  double ade_without = 0.0;
  for (const Scene& s : scenes) {
    const SceneOutput a = evaluate_scene(with_text, s, planner_config, eval_config);
    const SceneOutput b = evaluate_scene(no_text, s, planner_config, eval_config);
    if (!(a.command == b.command)) {
      throw ReportError("delta_ade: text passes drew different commands for scene " +
                        std::to_string(s.id));
    }
    ade_with += ade(a.selected, s.future);
    ade_without += ade(b.selected, s.future);
  }
  return (ade_without - ade_with) / static_cast<double>(scenes.size());
}

EvalReport build_report(const std::vector<MethodSpec>& methods, const std::vector<Scene>& scenes,
                        const PlannerConfig& planner_config, const EvalConfig& eval_config,
                        const std::string& gain_reference) {
  EvalReport report;
  report.regime = eval_config.regime;
  report.eval_seed = eval_config.eval_seed;
  report.gain_reference = gain_reference;
  for (const MethodSpec& m : methods) {
    report.rows.push_back(evaluate_method(m, scenes, planner_config, eval_config));
  }
  const MethodResult* reference = nullptr;
  for (const MethodResult& row : report.rows) {
    if (row.name == gain_reference) reference = &row;
  }
  if (!reference) {
    throw ReportError("build_report: gain reference row '" + gain_reference + "' not evaluated");
  }
  for (MethodResult& row : report.rows) {
    if (row.name != gain_reference) row.gain = reference->ade - row.ade;
  }
  return report;
}

namespace {

std::string metric_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  if (!report.config_hash.empty()) out << "# config " << report.config_hash << "\n";
  out << "method,regime,ade,fde,a1s,a2s,a3s,a4s,a5s,a6s,delta_ade,gain\n";
  for (const MethodResult& row : report.rows) {
    out << row.name << "," << to_string(row.regime) << "," << metric_str(row.ade) << ","
        << metric_str(row.fde);
    for (double a : row.a_at) out << "," << metric_str(a);
    out << "," << (row.delta_ade ? metric_str(*row.delta_ade) : "") << ","
        << (row.gain ? metric_str(*row.gain) : "") << "\n";
  }
  return out.str();
}

std::vector<MethodResult> report_rows_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("report csv: empty");
  while (!line.empty() && line[0] == '#') {
    if (!std::getline(in, line)) throw ParseError("report csv: empty");
  }
  if (line != "method,regime,ade,fde,a1s,a2s,a3s,a4s,a5s,a6s,delta_ade,gain") {
    throw ParseError("report csv: unexpected header: " + line);
  }
  std::vector<MethodResult> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    // A trailing empty gain cell is dropped by getline; restore it.
    while (cells.size() < 12) cells.push_back("");
    if (cells.size() != 12) {
      throw ParseError("report csv:" + std::to_string(line_no) + ": expected 12 cells");
    }
    MethodResult row;
    row.name = cells[0];
    row.regime = regime_from_string(cells[1]);
    row.ade = std::stod(cells[2]);
    row.fde = std::stod(cells[3]);
    for (int i = 0; i < 6; ++i) row.a_at[i] = std::stod(cells[4 + i]);
    if (!cells[10].empty()) row.delta_ade = std::stod(cells[10]);
    if (!cells[11].empty()) row.gain = std::stod(cells[11]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["regime"] = to_string(report.regime);
  j["eval_seed"] = report.eval_seed;
  j["config_hash"] = report.config_hash;
  j["gain_reference"] = report.gain_reference;
  j["checkpoint_hashes"] = report.checkpoint_hashes;
  json rows = json::array();
  for (const MethodResult& row : report.rows) {
    json r;
    r["method"] = row.name;
    r["regime"] = to_string(row.regime);
    r["ade"] = row.ade;
    r["fde"] = row.fde;
    for (int k = 1; k <= 6; ++k) r["a" + std::to_string(k) + "s"] = row.a_at[k - 1];
    if (row.delta_ade) r["delta_ade"] = *row.delta_ade;
    if (row.gain) r["gain"] = *row.gain;
    json audit = json::array();
    for (const SceneAudit& a : row.audit) {
      json entry;
      entry["scene_id"] = a.scene_id;
      entry["command"] = a.command;
      entry["override_fired"] = a.override_fired;
      if (!a.override_reason.empty()) entry["override_reason"] = a.override_reason;
      audit.push_back(std::move(entry));
    }
    r["audit"] = std::move(audit);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

void dump_trajectories(const std::string& path, const MethodSpec& method,
                       const std::vector<Scene>& scenes, const PlannerConfig& planner_config,
                       const EvalConfig& eval_config, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw ReportError("dump_trajectories: cannot open " + path);
  {
    json header;
    header["record"] = "header";
    header["method"] = method.name;
    header["config_hash"] = config_hash;
    out << header.dump() << "\n";
  }
  auto poly = [](const Polyline& line) {
    json arr = json::array();
    for (const Vec2& p : line) arr.push_back(json::array({p.x, p.y}));
    return arr;
  };
  for (const Scene& s : scenes) {
    const SceneOutput o = evaluate_scene(method, s, planner_config, eval_config);
    json j;
    j["scene_id"] = s.id;
    j["method"] = method.name;
    j["command"] = o.command.index();
    json modes = json::array();
    for (const Polyline& m : o.base) modes.push_back(poly(m));
    j["mode_trajectories"] = std::move(modes);
    json res = json::array();
    for (const Polyline& r : o.residual) res.push_back(poly(r));
    j["residual"] = std::move(res);
    j["selected"] = poly(o.selected);
    j["override_fired"] = o.override_fired;
    out << j.dump() << "\n";
  }
}

}  // namespace nudge
