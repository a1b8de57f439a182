#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nudge/cli.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Run configuration (JSON)")->required();
  cmd->add_option("--set", args.overrides,
                  "Override a config key, e.g. --set train.epochs=30 (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-nudged trajectory planning sandbox: synthetic scene generation, "
               "frozen-planner residual training, and command-reliability evaluation"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, ablate_args;
  std::string resume_path;
  bool parallel = false;

  CLI::App* gen = app.add_subcommand("gen", "Generate the train/val datasets");
  add_common(gen, gen_args);

  CLI::App* train = app.add_subcommand("train", "Train baselines and the residual adapter");
  add_common(train, train_args);
  train->add_option("--resume", resume_path, "Adapter checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate checkpoints into a report");
  add_common(eval, eval_args);

  CLI::App* ablate =
      app.add_subcommand("ablate", "Adapter progression sweep under random command routing");
  add_common(ablate, ablate_args);
  ablate->add_flag("--parallel", parallel, "Train ablation variants in parallel threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      nudge::run_gen(nudge::resolve_config(gen_args.config_path, gen_args.overrides));
    } else if (train->parsed()) {
      nudge::run_train(nudge::resolve_config(train_args.config_path, train_args.overrides),
                       resume_path);
    } else if (eval->parsed()) {
      nudge::run_eval(nudge::resolve_config(eval_args.config_path, eval_args.overrides));
    } else if (ablate->parsed()) {
      nudge::run_ablate(nudge::resolve_config(ablate_args.config_path, ablate_args.overrides),
                        parallel);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nudge::exit_code_for(e);
  }
  return 0;
}
