#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nudge/cli.hpp"
#include "nudge/config.hpp"
#include "nudge/evaluator.hpp"
#include "nudge/trainer.hpp"

using namespace nudge;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

/// Tiny but complete run configuration for pipeline tests.
json tiny_config_json(const std::string& out_dir) {
  json j;
  j["seed"] = 21;
  j["out_dir"] = out_dir;
  j["dataset"] = {{"n_train", 64}, {"n_val", 32}};
  j["train"] = {{"epochs", 4}, {"base_lr", 0.05}, {"fit_base_lr", 0.01}, {"regime", "random"}};
  return j;
}

}  // namespace

TEST_CASE("defaults parse from an empty object and hash deterministically") {
  const RunConfig a = run_config_from_json(json::object());
  const RunConfig b = run_config_from_json(json::object());
  CHECK(config_hash(a) == config_hash(b));
  CHECK(a.train.epochs == 60);
  CHECK(a.train.base_lr == 1e-4);
  CHECK(a.train.batch_size == 32);
  CHECK(a.adapter.variant == Variant::kFilm);
  CHECK(a.dataset.generator.filler_fraction == 0.25);
}

TEST_CASE("unknown keys are rejected by name") {
  json j;
  j["train"] = {{"epochs", 10}, {"warmup", 5}};
  try {
    run_config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("warmup") != std::string::npos);
  }
  json top;
  top["trian"] = json::object();
  CHECK_THROWS_AS(run_config_from_json(top), ConfigError);
}

TEST_CASE("ill-typed and invalid values are rejected") {
  json j;
  j["train"] = {{"epochs", "sixty"}};
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);

  json bad_regime;
  bad_regime["train"] = {{"regime", "oracle"}};
  CHECK_THROWS_AS(run_config_from_json(bad_regime), ConfigError);

  json bad_range;
  bad_range["dataset"] = {{"curvature_min", -0.5}};
  CHECK_THROWS_AS(run_config_from_json(bad_range), ConfigError);
}

TEST_CASE("config hash covers knobs but not the output directory") {
  json base = json::object();
  const std::string h0 = config_hash(run_config_from_json(base));

  json moved = base;
  moved["out_dir"] = "/some/other/place";
  CHECK(config_hash(run_config_from_json(moved)) == h0);

  json tweaked = base;
  tweaked["train"] = {{"epochs", 61}};
  CHECK(config_hash(run_config_from_json(tweaked)) != h0);

  json lexicon = base;
  lexicon["eval"] = {{"hard_stop", {"stop"}}};
  CHECK(config_hash(run_config_from_json(lexicon)) != h0);
}

TEST_CASE("resolved config round-trips") {
  json j = tiny_config_json("/tmp/x");
  const RunConfig c = run_config_from_json(j);
  const json resolved = run_config_to_json(c);
  const RunConfig c2 = run_config_from_json(resolved);
  CHECK(config_hash(c) == config_hash(c2));
  CHECK(run_config_to_json(c2) == resolved);
}

TEST_CASE("dotted overrides") {
  json j = json::object();
  apply_override(j, "train.epochs=30");
  apply_override(j, "adapter.variant=plain");
  apply_override(j, "dataset.noise_sigma=0.05");
  const RunConfig c = run_config_from_json(j);
  CHECK(c.train.epochs == 30);
  CHECK(c.adapter.variant == Variant::kPlainResidual);
  CHECK(c.dataset.generator.noise_sigma == 0.05);
  CHECK_THROWS_AS(apply_override(j, "no-equals-sign"), ConfigError);
}

TEST_CASE("pipeline: gen is byte-deterministic and train/eval run end to end") {
  TempDir dir("nudge_cli_test");
  const std::string out = (dir.path / "run").string();
  const RunConfig config = run_config_from_json(tiny_config_json(out));
  const RunPaths paths(out);

  run_gen(config);
  const std::string train_bytes = read_file(paths.train_dataset());
  const std::string val_bytes = read_file(paths.val_dataset());
  run_gen(config);
  CHECK(read_file(paths.train_dataset()) == train_bytes);
  CHECK(read_file(paths.val_dataset()) == val_bytes);

  run_train(config);
  CHECK(fs::exists(paths.planner("stage1")));
  CHECK(fs::exists(paths.planner("init")));
  CHECK(fs::exists(paths.planner("ft")));
  CHECK(fs::exists(paths.adapter_checkpoint(Variant::kFilm, Regime::kRandom)));
  CHECK(fs::exists(paths.train_log(Variant::kFilm, Regime::kRandom)));

  // Disjoint id ranges across the split boundary.
  const LoadedDataset train_ds = load_dataset(paths.train_dataset().string());
  const LoadedDataset val_ds = load_dataset(paths.val_dataset().string());
  for (const Scene& s : train_ds.scenes) CHECK(s.id < 64);
  for (const Scene& s : val_ds.scenes) CHECK(s.id >= 64);

  run_eval(config);
  CHECK(fs::exists(paths.report_csv()));
  CHECK(fs::exists(paths.report_json()));
  const std::string csv_text = read_file(paths.report_csv());
  CHECK(csv_text.rfind("# config ", 0) == 0);  // hash embedded
  const auto rows = report_rows_from_csv(csv_text);
  REQUIRE(rows.size() >= 5);
  CHECK(rows[0].name == "stage1-base");

  // Every artifact embeds the same config hash.
  const std::string hash = config_hash(config);
  CHECK(read_file(paths.resolved_config()).find(hash) != std::string::npos);
  CHECK(read_file(paths.report_json()).find(hash) != std::string::npos);
  CHECK(read_file(paths.planner("ft")).find(hash) != std::string::npos);
}

TEST_CASE("eval refuses checkpoints from a different configuration") {
  TempDir dir("nudge_cli_mismatch");
  const std::string out = (dir.path / "run").string();
  const RunConfig config = run_config_from_json(tiny_config_json(out));
  run_train(config);

  json changed = tiny_config_json(out);
  changed["train"]["epochs"] = 5;  // different science, same directory
  const RunConfig other = run_config_from_json(changed);
  CHECK_THROWS_AS(run_eval(other), ConfigError);
}

TEST_CASE("eval without checkpoints is a report error") {
  TempDir dir("nudge_cli_missing");
  const std::string out = (dir.path / "run").string();
  const RunConfig config = run_config_from_json(tiny_config_json(out));
  run_gen(config);
  CHECK_THROWS_AS(run_eval(config), ReportError);
}

TEST_CASE("exit codes map error classes distinctly") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(ParseError("x")) == 3);
  CHECK(exit_code_for(TrainingError("x")) == 4);
  CHECK(exit_code_for(ReportError("x")) == 5);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}
