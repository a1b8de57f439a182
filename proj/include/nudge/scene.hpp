#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nudge/geometry.hpp"

namespace nudge {

constexpr int kHistorySteps = 4;   // T_h, 2 Hz
constexpr int kHorizonSteps = 12;  // T_f, 6 s at 2 Hz
constexpr double kStepSeconds = 0.5;

enum class Maneuver { kLeft, kStraight, kRight, kStop };
enum class Split { kTrain, kVal };

const char* to_string(Maneuver m);
const char* to_string(Split s);
Maneuver maneuver_from_string(const std::string& s);
Split split_from_string(const std::string& s);

/// One synthetic driving sample in the ego frame (history ends at the origin,
/// heading +x). Waypoints are meters at 2 Hz.
struct Scene {
  int64_t id = 0;
  Polyline history;                 // T_h points, last is the origin
  std::vector<Polyline> lanelets;   // centerline polylines
  Polyline future;                  // T_f points
  Maneuver maneuver = Maneuver::kStraight;
  std::string instruction;
  Split split = Split::kTrain;
};

/// Mean speed over the history (m/s).
double mean_history_speed(const Polyline& history);

/// One-hot maneuver class over {left, straight, right}.
struct Command {
  std::array<int, 3> onehot{0, 1, 0};

  static Command left() { return Command{{1, 0, 0}}; }
  static Command straight() { return Command{{0, 1, 0}}; }
  static Command right() { return Command{{0, 0, 1}}; }
  static Command from_index(int i);

  bool is_onehot() const;
  /// Index of the hot entry; UsageError if not one-hot.
  int index() const;
};

inline bool operator==(const Command& a, const Command& b) { return a.onehot == b.onehot; }

/// Header record carried at the top of every dataset file.
struct DatasetHeader {
  uint64_t seed = 0;
  std::string config_hash;
  int64_t n_scenes = 0;
};

/// Line-delimited self-describing records, one scene per line after the
/// header. Round-trips losslessly (write -> read -> write is byte-identical).
void save_dataset(const std::string& path, const std::vector<Scene>& scenes,
                  const DatasetHeader& header);
void save_dataset(std::ostream& out, const std::vector<Scene>& scenes,
                  const DatasetHeader& header);

struct LoadedDataset {
  DatasetHeader header;
  std::vector<Scene> scenes;
};
/// Throws ParseError naming the failing line on malformed input.
LoadedDataset load_dataset(const std::string& path);
LoadedDataset load_dataset(std::istream& in, const std::string& path_for_errors);

}  // namespace nudge
