#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "npga/commands.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  long long seed_override = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool out_required = true) {
  cmd->add_option("--config", args.config, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", args.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", args.seed_override, "override the optimizer seed");
}

npga::RunConfig load(const CommonArgs& args) {
  npga::RunConfig rc = npga::parse_run_config(args.config);
  if (args.seed_override >= 0) {
    rc.model.seed = static_cast<std::uint64_t>(args.seed_override);
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonparametrically guided autoencoder"};
  app.require_subcommand(1);

  CommonArgs train_args, grid_args, gradcheck_args, synth_args, export_args, eval_args;

  auto* train = app.add_subcommand("train", "train one model and probe it");
  add_common(train, train_args);
  auto* grid = app.add_subcommand("grid", "sweep (alpha, beta, repeat) cells");
  add_common(grid, grid_args);
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference checks for every cost term");
  add_common(gradcheck, gradcheck_args, /*out_required=*/false);
  auto* gen_synth =
      app.add_subcommand("gen-synth", "write the synthetic multi-factor dataset");
  add_common(gen_synth, synth_args);
  auto* export_latent =
      app.add_subcommand("export-latent", "export projected latent coordinates");
  add_common(export_latent, export_args);
  auto* evalc = app.add_subcommand("eval", "probe an existing checkpoint");
  add_common(evalc, eval_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return npga::cli::cmd_train(load(train_args), train_args.out);
    if (grid->parsed()) return npga::cli::cmd_grid(load(grid_args), grid_args.out);
    if (gradcheck->parsed()) {
      return npga::cli::cmd_gradcheck(load(gradcheck_args), gradcheck_args.out);
    }
    if (gen_synth->parsed()) return npga::cli::cmd_gen_synth(load(synth_args), synth_args.out);
    if (export_latent->parsed()) {
      return npga::cli::cmd_export_latent(load(export_args), export_args.out);
    }
    if (evalc->parsed()) return npga::cli::cmd_eval(load(eval_args), eval_args.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
