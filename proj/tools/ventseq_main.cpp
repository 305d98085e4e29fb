#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ventseq/cli.hpp"

namespace {

using ventseq::RunConfig;

void add_model_flags(CLI::App* cmd, RunConfig& cfg, std::vector<std::size_t>& units) {
  cmd->add_option("--units", units,
                  "recurrent widths: one value for all layers, or six "
                  "(stem, block1..block4, tail)")
      ->expected(1, 6);
  cmd->add_option("--dense-hidden", cfg.model.dense_hidden,
                  "width of the SELU hidden dense layer (0 disables it)");
}

void apply_units(const std::vector<std::size_t>& units, RunConfig& cfg) {
  if (units.empty()) return;
  if (units.size() == 1) {
    cfg.model.stem_units = units[0];
    cfg.model.block_units = {units[0], units[0], units[0], units[0]};
    cfg.model.tail_units = units[0];
  } else if (units.size() == 6) {
    cfg.model.stem_units = units[0];
    cfg.model.block_units = {units[1], units[2], units[3], units[4]};
    cfg.model.tail_units = units[5];
  } else {
    throw ventseq::UsageError("--units takes 1 or 6 values");
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"ventseq: hybrid Bi-LSTM/Bi-GRU ventilator pressure forecaster"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<std::size_t> units;
  std::string loss_name = "mae";

  auto* synth = app.add_subcommand("synth", "generate a synthetic lung dataset CSV");
  synth->add_option("--synth", cfg.synth_breaths, "number of breaths")->default_val(64);
  synth->add_option("--seq-len", cfg.seq_len, "timesteps per breath");
  synth->add_option("--seed", cfg.seed, "random seed");
  synth->add_option("--out", cfg.synth_out, "output CSV path");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", cfg.data_path, "training CSV");
  train->add_option("--synth", cfg.synth_breaths, "train on N synthetic breaths instead");
  train->add_option("--seq-len", cfg.seq_len, "synthetic breath length");
  train->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint output path");
  train->add_option("--metrics-out", cfg.metrics_out, "metrics.csv output path");
  train->add_option("--epochs", cfg.epochs, "training epochs");
  train->add_option("--batch-size", cfg.batch_size, "breaths per batch");
  train->add_option("--loss", loss_name, "training loss")
      ->check(CLI::IsMember({"mae", "mse"}));
  train->add_option("--lr", cfg.lr, "Adam learning rate");
  train->add_option("--seed", cfg.seed, "random seed");
  train->add_option("--patience", cfg.patience, "early-stop patience (0 disables)");
  train->add_flag("--scale-rc", cfg.scale_rc, "also robust-scale the R and C columns");
  train->add_flag("--timing", cfg.include_timing,
                  "write measured wall time into metrics.csv (breaks byte-identical reruns)");
  add_model_flags(train, cfg, units);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on labeled data");
  eval->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint path");
  eval->add_option("--data", cfg.data_path, "labeled CSV");
  eval->add_option("--synth", cfg.synth_breaths, "evaluate on N synthetic breaths");
  eval->add_option("--seq-len", cfg.seq_len, "synthetic breath length");
  eval->add_option("--batch-size", cfg.batch_size, "breaths per batch");
  eval->add_option("--seed", cfg.seed, "seed for synthetic data");
  eval->add_option("--pred-out", cfg.pred_out, "per-timestep prediction dump CSV");
  eval->add_flag("--mask-inspiratory", cfg.mask_inspiratory,
                 "compute metrics over inspiratory (u_out=0) steps only");

  auto* predict = app.add_subcommand("predict", "predict pressures for an unlabeled CSV");
  predict->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint path");
  predict->add_option("--data", cfg.data_path, "input CSV")->required();
  predict->add_option("--batch-size", cfg.batch_size, "breaths per batch");
  predict->add_option("--pred-out", cfg.pred_out, "output CSV (default predictions.csv)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--seed", cfg.seed, "random seed for the checked configs");
  gradcheck->add_flag("--fault-inject", cfg.fault_inject,
                      "corrupt one gradient to exercise the failure path");

  auto* params = app.add_subcommand("params", "print parameter counts and layer census");
  params->add_option("--seed", cfg.seed, "model seed");
  add_model_flags(params, cfg, units);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ventseq::kExitOk : ventseq::kExitUsage;
  }

  try {
    apply_units(units, cfg);
    cfg.loss = loss_name == "mse" ? ventseq::LossKind::Mse : ventseq::LossKind::Mae;
    if (synth->parsed()) return ventseq::cmd_synth(cfg);
    if (train->parsed()) return ventseq::cmd_train(cfg);
    if (eval->parsed()) return ventseq::cmd_eval(cfg);
    if (predict->parsed()) return ventseq::cmd_predict(cfg);
    if (gradcheck->parsed()) return ventseq::cmd_gradcheck(cfg);
    if (params->parsed()) return ventseq::cmd_params(cfg);
  } catch (const ventseq::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return ventseq::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ventseq::kExitFail;
  }
  return ventseq::kExitUsage;
}
