#include "nudge/cli.hpp"

#include <fstream>
#include <iostream>
#include <thread>

#include "nudge/evaluator.hpp"
#include "nudge/io.hpp"
#include "nudge/trainer.hpp"

namespace nudge {

namespace fs = std::filesystem;
using json = nlohmann::json;

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  for (const std::string& assignment : overrides) {
    apply_override(j, assignment);
  }
  return run_config_from_json(j);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const ParseError*>(&e)) return 3;
  if (dynamic_cast<const TrainingError*>(&e)) return 4;
  if (dynamic_cast<const ReportError*>(&e)) return 5;
  return 1;
}

namespace {

void write_resolved_config(const RunConfig& config, const RunPaths& paths) {
  json j = run_config_to_json(config);
  j["config_hash"] = config_hash(config);
  std::ofstream out(paths.resolved_config());
  if (!out) throw ConfigError("cannot write " + paths.resolved_config().string());
  out << j.dump(2) << "\n";
}

struct Datasets {
  std::vector<Scene> train;
  std::vector<Scene> val;
};

/// Loads the run's datasets, generating and saving them first when absent.
/// A stored header hash that disagrees with the active config is surfaced as
/// a warning (the data may predate a config edit).
Datasets ensure_datasets(const RunConfig& config, const RunPaths& paths) {
  const std::string hash = config_hash(config);
  fs::create_directories(paths.out);
  if (!fs::exists(paths.train_dataset()) || !fs::exists(paths.val_dataset())) {
    const auto train = generate_dataset(config.seed, config.dataset.n_train,
                                        config.dataset.generator, Split::kTrain, 0);
    const auto val = generate_dataset(config.seed, config.dataset.n_val, config.dataset.generator,
                                      Split::kVal, config.dataset.n_train);
    save_dataset(paths.train_dataset().string(), train, {config.seed, hash, 0});
    save_dataset(paths.val_dataset().string(), val, {config.seed, hash, 0});
  }
  Datasets ds;
  LoadedDataset train_file = load_dataset(paths.train_dataset().string());
  LoadedDataset val_file = load_dataset(paths.val_dataset().string());
  for (const LoadedDataset* file : {&train_file, &val_file}) {
    if (file->header.config_hash != hash) {
      std::cerr << "warning: dataset header hash " << file->header.config_hash
                << " does not match the resolved config hash " << hash
                << " (dataset may predate a config change; rerun gen to refresh)\n";
    }
  }
  ds.train = std::move(train_file.scenes);
  ds.val = std::move(val_file.scenes);
  return ds;
}

void save_baselines(const BaselineBundle& bundle, const RunPaths& paths,
                    const std::string& hash) {
  save_planner(paths.planner("stage1").string(), bundle.stage1, hash);
  save_planner(paths.planner("init").string(), bundle.init, hash);
  save_planner(paths.planner("ft").string(), bundle.ft, hash);
}

PlannerParams load_planner_checked(const fs::path& path, const std::string& expected_hash) {
  if (!fs::exists(path)) {
    throw ReportError("missing planner checkpoint " + path.string() + " (run train first)");
  }
  std::string stored;
  PlannerParams p = load_planner(path.string(), &stored);
  if (stored != expected_hash) {
    throw ConfigError("checkpoint " + path.string() + " was produced under config hash " + stored +
                      " but the active config hashes to " + expected_hash +
                      "; refusing to mix configurations");
  }
  return p;
}

Checkpoint load_adapter_checked(const fs::path& path, const AdapterConfig& adapter_config,
                                const std::string& expected_hash) {
  if (!fs::exists(path)) {
    throw ReportError("missing adapter checkpoint " + path.string() + " (run train first)");
  }
  Checkpoint ckpt = Checkpoint::load(path.string(), adapter_config);
  if (ckpt.config_hash != expected_hash) {
    throw ConfigError("checkpoint " + path.string() + " was produced under config hash " +
                      ckpt.config_hash + " but the active config hashes to " + expected_hash +
                      "; refusing to mix configurations");
  }
  return ckpt;
}

void write_train_log(const fs::path& path, const std::vector<TrainLogRow>& log,
                     const std::string& hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  {
    json header;
    header["record"] = "header";
    header["config_hash"] = hash;
    out << header.dump() << "\n";
  }
  for (const TrainLogRow& row : log) {
    json j;
    j["epoch"] = row.epoch;
    j["lr"] = row.lr;
    j["train_loss"] = row.train_loss;
    if (row.val_ade >= 0.0) j["val_ade"] = row.val_ade;
    out << j.dump() << "\n";
  }
}

void write_report_files(const EvalReport& report, const fs::path& csv_path,
                        const fs::path& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw ReportError("cannot write " + csv_path.string());
  csv << report_to_csv(report);
  std::ofstream js(json_path);
  if (!js) throw ReportError("cannot write " + json_path.string());
  js << report_to_json(report);
}

Checkpoint train_one_adapter(const Datasets& ds, const PlannerParams& theta,
                             const RunConfig& config, const RunPaths& paths, Variant variant,
                             const std::string& resume_path) {
  TrainConfig tc = config.train;
  tc.variant = variant;
  AdapterConfig ac = config.adapter;
  ac.variant = variant;

  std::unique_ptr<Checkpoint> resume;
  if (!resume_path.empty()) {
    resume = std::make_unique<Checkpoint>(Checkpoint::load(resume_path, ac));
    if (resume->config_hash != config_hash(config)) {
      throw ConfigError("resume checkpoint " + resume_path + " carries config hash " +
                        resume->config_hash + ", which does not match the active config");
    }
  }

  const std::string hash = config_hash(config);
  std::function<void(const Checkpoint&)> hook;
  if (tc.checkpoint_every > 0) {
    hook = [&, hash](const Checkpoint& ckpt) {
      Checkpoint copy = ckpt;  // annotate with the config hash before writing
      copy.config_hash = hash;
      copy.save(paths.adapter_epoch_checkpoint(variant, tc.regime, ckpt.epochs_done).string());
    };
  }

  TrainResult result =
      train_adapter(ds.train, ds.val, theta, config.planner, tc, resume.get(), hook);
  result.checkpoint.config_hash = hash;
  result.checkpoint.save(paths.adapter_checkpoint(variant, tc.regime).string());
  write_train_log(paths.train_log(variant, tc.regime), result.log, hash);
  return std::move(result.checkpoint);
}

}  // namespace

void run_gen(const RunConfig& config) {
  const RunPaths paths(config.out_dir);
  fs::create_directories(paths.out);
  write_resolved_config(config, paths);
  const std::string hash = config_hash(config);
  const auto train = generate_dataset(config.seed, config.dataset.n_train,
                                      config.dataset.generator, Split::kTrain, 0);
  const auto val = generate_dataset(config.seed, config.dataset.n_val, config.dataset.generator,
                                    Split::kVal, config.dataset.n_train);
  save_dataset(paths.train_dataset().string(), train, {config.seed, hash, 0});
  save_dataset(paths.val_dataset().string(), val, {config.seed, hash, 0});
  std::cout << "gen: wrote " << train.size() << " train / " << val.size() << " val scenes to "
            << paths.out.string() << " (config " << hash << ")\n";
}

void run_train(const RunConfig& config, const std::string& resume_path) {
  const RunPaths paths(config.out_dir);
  fs::create_directories(paths.out);
  write_resolved_config(config, paths);
  const Datasets ds = ensure_datasets(config, paths);
  const std::string hash = config_hash(config);

  const BaselineBundle bundle =
      train_baselines(ds.train, config.planner, config.train, config.init_budget_fraction);
  save_baselines(bundle, paths, hash);

  // The adapter sits on the deliberately under-trained checkpoint; the
  // compute-matched unconditional fine-tune is its fair comparator.
  const Checkpoint ckpt =
      train_one_adapter(ds, bundle.init, config, paths, config.adapter.variant, resume_path);
  std::cout << "train: adapter " << to_string(ckpt.variant) << " under " << to_string(ckpt.regime)
            << " regime, " << ckpt.adam_step << " steps, checkpoint "
            << paths.adapter_checkpoint(ckpt.variant, ckpt.regime).string() << "\n";
}

void run_eval(const RunConfig& config) {
  const RunPaths paths(config.out_dir);
  const Datasets ds = ensure_datasets(config, paths);
  const std::string hash = config_hash(config);

  const PlannerParams stage1 = load_planner_checked(paths.planner("stage1"), hash);
  const PlannerParams init = load_planner_checked(paths.planner("init"), hash);
  const PlannerParams ft = load_planner_checked(paths.planner("ft"), hash);
  AdapterConfig ac = config.adapter;
  const Checkpoint ckpt = load_adapter_checked(
      paths.adapter_checkpoint(config.adapter.variant, config.train.regime), ac, hash);

  EvalConfig ec;
  ec.regime = config.train.regime;
  ec.eval_seed = config.eval.eval_seed;
  ec.override_rule = config.eval.override_rule;

  const std::string residual_name = "residual-" + std::string(to_string(config.adapter.variant));
  std::vector<MethodSpec> methods;
  methods.push_back({"stage1-base", &stage1, nullptr, false, false, false});
  methods.push_back({"planner-init", &init, nullptr, false, false, false});
  methods.push_back({"planner-ft", &ft, nullptr, false, false, false});
  methods.push_back({residual_name + "-notext", &init, &ckpt.adapter, false, false, false});
  methods.push_back({residual_name, &init, &ckpt.adapter, true, true, false});
  if (config.eval.stop_override) {
    methods.push_back({residual_name + "+override", &init, &ckpt.adapter, true, false, true});
  }

  EvalReport report = build_report(methods, ds.val, config.planner, ec, "planner-ft");
  report.config_hash = hash;
  report.checkpoint_hashes["stage1-base"] = hash_to_hex(stage1.hash());
  report.checkpoint_hashes["planner-init"] = hash_to_hex(init.hash());
  report.checkpoint_hashes["planner-ft"] = hash_to_hex(ft.hash());
  report.checkpoint_hashes[residual_name] = hash_to_hex(ckpt.adapter.params_hash());
  write_report_files(report, paths.report_csv(), paths.report_json());

  if (config.eval.dump_trajectories) {
    for (const MethodSpec& m : methods) {
      if (m.name == residual_name || m.name == "planner-ft") {
        dump_trajectories(paths.trajectory_dump(m.name).string(), m, ds.val, config.planner, ec,
                          hash);
      }
    }
  }
  std::cout << report_to_csv(report);
}

void run_ablate(const RunConfig& user_config, bool parallel) {
  RunConfig config = user_config;
  if (config.train.regime != Regime::kRandom) {
    std::cerr << "ablate: forcing the random command regime (adapter progression is defined "
                 "under unreliable routing)\n";
    config.train.regime = Regime::kRandom;
  }
  const RunPaths paths(config.out_dir);
  fs::create_directories(paths.out);
  write_resolved_config(config, paths);
  const Datasets ds = ensure_datasets(config, paths);
  const std::string hash = config_hash(config);

  const BaselineBundle bundle =
      train_baselines(ds.train, config.planner, config.train, config.init_budget_fraction);
  save_baselines(bundle, paths, hash);

  const std::array<Variant, 3> variants = {Variant::kPlainResidual, Variant::kLargeMlp,
                                           Variant::kFilm};
  std::array<std::unique_ptr<Checkpoint>, 3> checkpoints;
  auto train_variant = [&](size_t i) {
    checkpoints[i] = std::make_unique<Checkpoint>(
        train_one_adapter(ds, bundle.init, config, paths, variants[i], ""));
  };
  if (parallel) {
    std::vector<std::thread> workers;
    for (size_t i = 0; i < variants.size(); ++i) workers.emplace_back(train_variant, i);
    for (std::thread& w : workers) w.join();
  } else {
    for (size_t i = 0; i < variants.size(); ++i) train_variant(i);
  }

  EvalConfig ec;
  ec.regime = Regime::kRandom;
  ec.eval_seed = config.eval.eval_seed;
  ec.override_rule = config.eval.override_rule;

  std::vector<MethodSpec> methods;
  methods.push_back({"stage1-base", &bundle.stage1, nullptr, false, false, false});
  methods.push_back({"planner-ft", &bundle.ft, nullptr, false, false, false});
  methods.push_back({"residual-plain", &bundle.init, &checkpoints[0]->adapter, true, false, false});
  methods.push_back(
      {"residual-large-mlp", &bundle.init, &checkpoints[1]->adapter, true, false, false});
  methods.push_back({"residual-film", &bundle.init, &checkpoints[2]->adapter, true, true, false});
  methods.push_back(
      {"residual-film+override", &bundle.init, &checkpoints[2]->adapter, true, false, true});

  EvalReport report = build_report(methods, ds.val, config.planner, ec, "stage1-base");
  report.config_hash = hash;
  for (size_t i = 0; i < variants.size(); ++i) {
    report.checkpoint_hashes[std::string("residual-") + to_string(variants[i])] =
        hash_to_hex(checkpoints[i]->adapter.params_hash());
  }
  write_report_files(report, paths.ablation_csv(), paths.ablation_json());
  std::cout << report_to_csv(report);
}

}  // namespace nudge
