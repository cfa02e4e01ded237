// Command-line entry point. All real work lives in cause/cli.hpp; this file
// only parses arguments and dispatches.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cause/cli.hpp"

namespace {

int dispatch(CLI::App& app, cause::cli::TrainArgs& train_args, cause::cli::TrainArgs& ablate_args,
             cause::cli::EvalArgs& eval_args, cause::cli::CorruptArgs& corrupt_args,
             cause::cli::ExportArgs& export_args, const std::string& eval_view,
             const std::string& eval_split, const std::string& export_view,
             const std::string& ablate_drop, const std::string& ablate_op,
             const std::string& corrupt_mode) {
  using namespace cause;
  try {
    if (app.got_subcommand("train")) return cli::cmd_train(train_args, std::cerr);
    if (app.got_subcommand("ablate")) {
      ablate_args.drop_loss = ablate_drop;
      if (!ablate_op.empty()) ablate_args.op_override = parse_intervention_op(ablate_op);
      return cli::cmd_ablate(ablate_args, std::cerr);
    }
    if (app.got_subcommand("evaluate")) {
      eval_args.view = parse_view(eval_view);
      eval_args.split = parse_split(eval_split);
      return cli::cmd_evaluate(eval_args, std::cout, std::cerr);
    }
    if (app.got_subcommand("corrupt")) {
      if (corrupt_mode == "replace") {
        corrupt_args.mode = NoiseMode::replace;
      } else if (corrupt_mode == "append") {
        corrupt_args.mode = NoiseMode::append;
      } else {
        throw ConfigError("unknown --mode '" + corrupt_mode + "' (expected replace|append)");
      }
      return cli::cmd_corrupt(corrupt_args, std::cerr);
    }
    if (app.got_subcommand("export")) {
      export_args.view = parse_view(export_view);
      return cli::cmd_export(export_args, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitUsage;
  }
  std::cerr << app.help();
  return cli::kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CausE: knowledge-graph embeddings with disentangled causal and confounder spaces"};
  app.require_subcommand(1);

  cause::cli::TrainArgs train_args;
  cause::cli::TrainArgs ablate_args;
  cause::cli::EvalArgs eval_args;
  cause::cli::CorruptArgs corrupt_args;
  cause::cli::ExportArgs export_args;
  std::string eval_view = "causal", eval_split = "test", export_view = "causal";
  std::string ablate_drop, ablate_op, corrupt_mode = "replace";
  std::optional<std::uint64_t> train_seed, ablate_seed;

  CLI::App* t = app.add_subcommand("train", "Train a model and write checkpoint/log/manifest");
  t->add_option("--config", train_args.config_path, "JSON config file")->required();
  t->add_option("--data", train_args.data_dir, "Dataset dir with train/valid/test.txt")->required();
  t->add_option("--out", train_args.out_dir, "Output run directory")->required();
  t->add_option("--seed", train_seed, "Override the config's seed");
  t->add_option("--threads", train_args.threads, "Worker threads (1 = serial)");

  CLI::App* a = app.add_subcommand("ablate", "Train with one loss dropped or the operator swapped");
  a->add_option("--config", ablate_args.config_path, "JSON config file")->required();
  a->add_option("--data", ablate_args.data_dir, "Dataset dir with train/valid/test.txt")->required();
  a->add_option("--out", ablate_args.out_dir, "Output run directory")->required();
  a->add_option("--seed", ablate_seed, "Override the config's seed");
  a->add_option("--threads", ablate_args.threads, "Worker threads (1 = serial)");
  a->add_option("--drop-loss", ablate_drop, "Loss term to zero: l_caus|l_conf|l_inter|l_aux1|l_aux2");
  a->add_option("--op", ablate_op, "Intervention operator override: add|subtract|multiply|concat");

  CLI::App* e = app.add_subcommand("evaluate", "Filtered link-prediction metrics for a checkpoint");
  e->add_option("checkpoint", eval_args.checkpoint_dir, "Checkpoint directory")->required();
  e->add_option("--data", eval_args.data_dir, "Dataset dir with train/valid/test.txt")->required();
  e->add_option("--view", eval_view, "Embedding view: causal|confounder|intervention");
  e->add_option("--split", eval_split, "Split to evaluate: valid|test");
  e->add_option("--threads", eval_args.threads, "Worker threads (1 = serial)");

  CLI::App* c = app.add_subcommand("corrupt", "Write a noisy copy of a dataset");
  c->add_option("--data", corrupt_args.data_dir, "Source dataset dir")->required();
  c->add_option("--out", corrupt_args.out_dir, "Output dataset dir")->required();
  c->add_option("--lambda", corrupt_args.lambda, "Noise rate in [0, 1]")->required();
  c->add_option("--seed", corrupt_args.seed, "Noise RNG seed");
  c->add_option("--mode", corrupt_mode, "replace (default) or append");

  CLI::App* x = app.add_subcommand("export", "Export one view's entity vectors as TSV");
  x->add_option("checkpoint", export_args.checkpoint_dir, "Checkpoint directory")->required();
  x->add_option("out_file", export_args.out_file, "Output TSV path")->required();
  x->add_option("--view", export_view, "Embedding view: causal|confounder|intervention");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : cause::cli::kExitUsage;
  }

  train_args.seed = train_seed;
  ablate_args.seed = ablate_seed;
  return dispatch(app, train_args, ablate_args, eval_args, corrupt_args, export_args, eval_view,
                  eval_split, export_view, ablate_drop, ablate_op, corrupt_mode);
}
