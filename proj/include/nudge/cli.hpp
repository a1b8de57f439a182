#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nudge/config.hpp"

namespace nudge {

/// Filesystem layout of one run directory.
struct RunPaths {
  std::filesystem::path out;

  explicit RunPaths(const std::string& out_dir) : out(out_dir) {}

  std::filesystem::path resolved_config() const { return out / "resolved_config.json"; }
  std::filesystem::path train_dataset() const { return out / "train.jsonl"; }
  std::filesystem::path val_dataset() const { return out / "val.jsonl"; }
  std::filesystem::path planner(const std::string& stage) const {
    return out / ("planner_" + stage + ".txt");
  }
  std::filesystem::path adapter_checkpoint(Variant v, Regime r) const {
    return out / ("adapter_" + std::string(to_string(v)) + "_" + to_string(r) + ".txt");
  }
  std::filesystem::path adapter_epoch_checkpoint(Variant v, Regime r, int epoch) const {
    return out / ("adapter_" + std::string(to_string(v)) + "_" + to_string(r) + "_epoch" +
                  std::to_string(epoch) + ".txt");
  }
  std::filesystem::path train_log(Variant v, Regime r) const {
    return out / ("train_log_" + std::string(to_string(v)) + "_" + to_string(r) + ".jsonl");
  }
  std::filesystem::path report_csv() const { return out / "report.csv"; }
  std::filesystem::path report_json() const { return out / "report.json"; }
  std::filesystem::path ablation_csv() const { return out / "ablation.csv"; }
  std::filesystem::path ablation_json() const { return out / "ablation.json"; }
  std::filesystem::path trajectory_dump(const std::string& method) const {
    return out / ("trajectories_" + method + ".jsonl");
  }
};

/// Load, apply --set overrides, validate.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);

/// Subcommand bodies; they throw (ConfigError, ParseError, TrainingError,
/// ReportError) and the entry point maps exceptions to exit codes.
void run_gen(const RunConfig& config);
void run_train(const RunConfig& config, const std::string& resume_path = "");
void run_eval(const RunConfig& config);
void run_ablate(const RunConfig& config, bool parallel = false);

/// Exit codes: 0 success, 2 config, 3 data/parse, 4 training, 5 report,
/// 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace nudge
