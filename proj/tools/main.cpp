#include <CLI11.hpp>

#include "mummi/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal state-space world model: training, evaluation, and latent analysis"};
  app.require_subcommand(1);

  mummi::cli::TrainCmdOptions train_opts;
  std::uint64_t train_seed = 0;
  long long train_steps = 0;
  double train_missing = 0.0;
  std::string train_variant, train_env, train_out, train_offline;
  auto* train = app.add_subcommand("train", "Train a world model and agent");
  train->add_option("--config", train_opts.config_path, "Run config JSON file");
  auto* o_seed = train->add_option("--seed", train_seed, "Run seed");
  auto* o_steps = train->add_option("--steps", train_steps, "Outer training iterations");
  auto* o_missing = train->add_option("--missing-rate", train_missing, "Training drop rate in [0,1]");
  auto* o_variant = train->add_option("--variant", train_variant, "Loss variant: mummi | mummi-b | elbo");
  auto* o_env = train->add_option("--env", train_env, "Environment: toy2d | toy2d-dualcam | toy2d-axes");
  auto* o_out = train->add_option("--out", train_out, "Run directory");
  auto* o_offline = train->add_option("--offline", train_offline, "Episode archive directory (no collection)");
  train->add_flag("--resume", train_opts.resume, "Resume from the run directory's checkpoint");

  mummi::cli::EvalCmdOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint under a missing-data regime");
  eval->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
  eval->add_option("--missing-rate", eval_opts.missing_rate, "Evaluation drop rate in [0,1]");
  eval->add_option("--episodes", eval_opts.episodes, "Evaluation episodes");
  eval->add_option("--seed", eval_opts.seed, "Evaluation seed");
  eval->add_flag("--cem", eval_opts.use_cem, "Act with the CEM planner instead of the actor");
  eval->add_option("--report", eval_opts.report_path, "Write the JSON report here");

  mummi::cli::VizCmdOptions viz_opts;
  auto* viz = app.add_subcommand("viz-latent", "Export latent-space scatter data and images");
  viz->add_option("--checkpoint", viz_opts.checkpoint, "Checkpoint file")->required();
  viz->add_option("--samples", viz_opts.samples, "States to collect");
  viz->add_option("--out", viz_opts.out_dir, "Output directory");
  viz->add_option("--seed", viz_opts.seed, "Collection seed");

  mummi::cli::GradcheckCmdOptions gc_opts;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the training losses");
  gradcheck->add_option("--h-dim", gc_opts.h_dim, "Deterministic state dim");
  gradcheck->add_option("--c-dim", gc_opts.c_dim, "Combined stochastic dim");
  gradcheck->add_option("--f-dim", gc_opts.f_dim, "Fused stochastic dim");
  gradcheck->add_option("--eps", gc_opts.eps, "Finite-difference step");
  gradcheck->add_option("--threshold", gc_opts.threshold, "Max relative error to pass");

  mummi::cli::GenDataCmdOptions gen_opts;
  auto* gen = app.add_subcommand("gen-data", "Generate a random-policy episode archive");
  gen->add_option("--env", gen_opts.env_name, "Environment name");
  gen->add_option("--config", gen_opts.config_path, "Run config JSON file (env details)");
  gen->add_option("--episodes", gen_opts.episodes, "Episode count");
  gen->add_option("--missing-rate", gen_opts.missing_rate, "Drop rate in [0,1]");
  gen->add_option("--out", gen_opts.out_dir, "Archive directory");
  gen->add_option("--seed", gen_opts.seed, "Generation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mummi::cli::kExitConfig;
  }

  if (train->parsed()) {
    if (o_seed->count()) train_opts.overrides.seed = train_seed;
    if (o_steps->count()) train_opts.overrides.steps = train_steps;
    if (o_missing->count()) train_opts.overrides.missing_rate = train_missing;
    if (o_variant->count()) train_opts.overrides.variant = train_variant;
    if (o_env->count()) train_opts.overrides.env_name = train_env;
    if (o_out->count()) train_opts.overrides.out_dir = train_out;
    if (o_offline->count()) train_opts.overrides.offline_dir = train_offline;
    return mummi::cli::cmd_train(train_opts);
  }
  if (eval->parsed()) return mummi::cli::cmd_eval(eval_opts);
  if (viz->parsed()) return mummi::cli::cmd_viz_latent(viz_opts);
  if (gradcheck->parsed()) return mummi::cli::cmd_gradcheck(gc_opts);
  if (gen->parsed()) return mummi::cli::cmd_gen_data(gen_opts);
  return mummi::cli::kExitConfig;
}
