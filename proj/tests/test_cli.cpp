#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "ventseq/cli.hpp"

using namespace ventseq;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

RunConfig small_train_config(const std::string& tag) {
  RunConfig cfg;
  cfg.synth_breaths = 8;
  cfg.seq_len = 16;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 7;
  cfg.model.stem_units = 2;
  cfg.model.block_units = {2, 2, 2, 2};
  cfg.model.tail_units = 2;
  cfg.model.dense_hidden = 2;
  cfg.checkpoint_path = "cli_" + tag + ".vseq";
  cfg.metrics_out = "cli_" + tag + "_metrics.csv";
  return cfg;
}

void cleanup(const RunConfig& cfg) {
  std::remove(cfg.checkpoint_path.c_str());
  std::remove(cfg.metrics_out.c_str());
}

} // namespace

TEST_CASE("train without data or synth is a usage error") {
  RunConfig cfg;
  cfg.synth_breaths = 0;
  cfg.data_path.clear();
  CHECK_THROWS_AS(cmd_train(cfg), UsageError);
}

TEST_CASE("synth then train then eval then predict") {
  RunConfig cfg = small_train_config("flow");
  REQUIRE(cmd_train(cfg) == kExitOk);

  // metrics.csv has a header plus one row per epoch
  const std::string metrics = read_file(cfg.metrics_out);
  CHECK(count_lines(metrics) == 1 + cfg.epochs);
  CHECK(metrics.rfind("epoch,train_mae,train_mse,val_mae,val_mse,seconds", 0) == 0);

  // eval the checkpoint on the same synthetic data
  RunConfig ev = cfg;
  ev.pred_out = "cli_flow_pred.csv";
  REQUIRE(cmd_eval(ev) == kExitOk);
  const std::string pred = read_file(ev.pred_out);
  CHECK(count_lines(pred) == 1 + 8 * 16); // header + breaths x T
  CHECK(pred.rfind("breath_id,time_step,actual,predicted", 0) == 0);

  // predict on an unlabeled file derived from the synthetic set
  RunConfig sy = cfg;
  sy.synth_out = "cli_flow_data.csv";
  REQUIRE(cmd_synth(sy) == kExitOk);
  {
    // strip the pressure column to make it unlabeled
    std::ifstream in(sy.synth_out);
    std::ofstream out("cli_flow_unlabeled.csv");
    std::string line;
    while (std::getline(in, line)) {
      const std::size_t cut = line.rfind(',');
      out << line.substr(0, cut) << "\n";
    }
  }
  RunConfig pr = cfg;
  pr.data_path = "cli_flow_unlabeled.csv";
  pr.pred_out = "cli_flow_predictions.csv";
  pr.synth_breaths = 0;
  REQUIRE(cmd_predict(pr) == kExitOk);
  const std::string predictions = read_file(pr.pred_out);
  CHECK(count_lines(predictions) == 1 + 8 * 16);
  CHECK(predictions.rfind("id,pressure", 0) == 0);

  // running predict twice is byte-identical
  REQUIRE(cmd_predict(pr) == kExitOk);
  CHECK(read_file(pr.pred_out) == predictions);

  cleanup(cfg);
  std::remove(ev.pred_out.c_str());
  std::remove(sy.synth_out.c_str());
  std::remove("cli_flow_unlabeled.csv");
  std::remove(pr.pred_out.c_str());
}

TEST_CASE("identical train invocations are byte-identical") {
  RunConfig a = small_train_config("det_a");
  RunConfig b = small_train_config("det_b");
  REQUIRE(cmd_train(a) == kExitOk);
  REQUIRE(cmd_train(b) == kExitOk);
  CHECK(read_file(a.metrics_out) == read_file(b.metrics_out));
  CHECK(read_file(a.checkpoint_path) == read_file(b.checkpoint_path));
  cleanup(a);
  cleanup(b);
}

TEST_CASE("gradcheck command exit codes") {
  RunConfig cfg;
  cfg.seed = 5;
  CHECK(cmd_gradcheck(cfg) == kExitOk);
  cfg.fault_inject = true;
  CHECK(cmd_gradcheck(cfg) == kExitFail);
}

TEST_CASE("params command") {
  RunConfig cfg;
  cfg.model.stem_units = 2;
  cfg.model.block_units = {2, 2, 2, 2};
  cfg.model.tail_units = 2;
  cfg.model.dense_hidden = 2;
  CHECK(cmd_params(cfg) == kExitOk);
}

TEST_CASE("eval rejects a missing checkpoint") {
  RunConfig cfg;
  cfg.checkpoint_path = "does_not_exist.vseq";
  cfg.synth_breaths = 2;
  cfg.seq_len = 8;
  CHECK_THROWS_AS(cmd_eval(cfg), FormatError);
}
