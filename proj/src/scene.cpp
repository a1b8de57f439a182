#include "nudge/scene.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nudge/errors.hpp"

namespace nudge {

using json = nlohmann::json;

const char* to_string(Maneuver m) {
  switch (m) {
    case Maneuver::kLeft: return "left";
    case Maneuver::kStraight: return "straight";
    case Maneuver::kRight: return "right";
    case Maneuver::kStop: return "stop";
  }
  return "straight";
}

const char* to_string(Split s) { return s == Split::kTrain ? "train" : "val"; }

Maneuver maneuver_from_string(const std::string& s) {
  if (s == "left") return Maneuver::kLeft;
  if (s == "straight") return Maneuver::kStraight;
  if (s == "right") return Maneuver::kRight;
  if (s == "stop") return Maneuver::kStop;
  throw ParseError("unknown maneuver: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  throw ParseError("unknown split: " + s);
}

double mean_history_speed(const Polyline& history) {
  if (history.size() < 2) return 0.0;
  double total = 0.0;
  for (size_t i = 1; i < history.size(); ++i) {
    total += distance(history[i - 1], history[i]);
  }
  return total / (kStepSeconds * static_cast<double>(history.size() - 1));
}

Command Command::from_index(int i) {
  if (i < 0 || i > 2) throw UsageError("Command::from_index: index out of range");
  Command c{{0, 0, 0}};
  c.onehot[i] = 1;
  return c;
}

bool Command::is_onehot() const {
  int ones = 0;
  for (int v : onehot) {
    if (v == 1) {
      ++ones;
    } else if (v != 0) {
      return false;
    }
  }
  return ones == 1;
}

int Command::index() const {
  if (!is_onehot()) throw UsageError("Command: not one-hot");
  for (int i = 0; i < 3; ++i) {
    if (onehot[i] == 1) return i;
  }
  return 1;
}

namespace {

json polyline_to_json(const Polyline& line) {
  json arr = json::array();
  for (const Vec2& p : line) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

Polyline polyline_from_json(const json& arr) {
  Polyline line;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2) throw ParseError("waypoint must be [x, y]");
    line.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return line;
}

json scene_to_json(const Scene& s) {
  json j;
  j["id"] = s.id;
  j["split"] = to_string(s.split);
  j["maneuver"] = to_string(s.maneuver);
  j["instruction"] = s.instruction;
  j["history"] = polyline_to_json(s.history);
  j["future"] = polyline_to_json(s.future);
  json lanes = json::array();
  for (const Polyline& l : s.lanelets) lanes.push_back(polyline_to_json(l));
  j["lanelets"] = lanes;
  return j;
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.id = j.at("id").get<int64_t>();
  s.split = split_from_string(j.at("split").get<std::string>());
  s.maneuver = maneuver_from_string(j.at("maneuver").get<std::string>());
  s.instruction = j.at("instruction").get<std::string>();
  s.history = polyline_from_json(j.at("history"));
  s.future = polyline_from_json(j.at("future"));
  for (const auto& l : j.at("lanelets")) s.lanelets.push_back(polyline_from_json(l));
  return s;
}

}  // namespace

void save_dataset(std::ostream& out, const std::vector<Scene>& scenes,
                  const DatasetHeader& header) {
  json h;
  h["record"] = "header";
  h["schema"] = "scene-dataset-v1";
  h["seed"] = header.seed;
  h["config_hash"] = header.config_hash;
  h["n_scenes"] = static_cast<int64_t>(scenes.size());
  out << h.dump() << "\n";
  for (const Scene& s : scenes) {
    out << scene_to_json(s).dump() << "\n";
  }
}

void save_dataset(const std::string& path, const std::vector<Scene>& scenes,
                  const DatasetHeader& header) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  save_dataset(out, scenes, header);
}

LoadedDataset load_dataset(std::istream& in, const std::string& path_for_errors) {
  LoadedDataset ds;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path_for_errors + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (!j.is_object() || j.value("record", "") != "header") {
          throw ParseError("first record must be the dataset header");
        }
        ds.header.seed = j.at("seed").get<uint64_t>();
        ds.header.config_hash = j.at("config_hash").get<std::string>();
        ds.header.n_scenes = j.at("n_scenes").get<int64_t>();
        have_header = true;
        continue;
      }
      ds.scenes.push_back(scene_from_json(j));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(path_for_errors + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) {
    throw ParseError(path_for_errors + ":1: missing dataset header");
  }
  if (ds.header.n_scenes != static_cast<int64_t>(ds.scenes.size())) {
    throw ParseError(path_for_errors + ":" + std::to_string(line_no) +
                     ": truncated dataset: header announces " +
                     std::to_string(ds.header.n_scenes) + " scenes, read " +
                     std::to_string(ds.scenes.size()));
  }
  return ds;
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return load_dataset(in, path);
}

}  // namespace nudge
