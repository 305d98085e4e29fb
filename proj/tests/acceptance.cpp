// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "scalar_oracle.hpp"
#include "ventseq/cli.hpp"
#include "ventseq/gradcheck.hpp"

using namespace ventseq;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail = "") {
  std::printf("%-24s %s%s%s\n", name.c_str(), pass ? "PASS" : "FAIL",
              detail.empty() ? "" : "  ", detail.c_str());
  if (!pass) ++failures;
}

double elapsed_s(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void check_gradcheck() {
  const auto start = Clock::now();
  bool ok = true;
  double worst = 0.0;
  for (const GradCheckResult& r : run_gradcheck(42)) {
    worst = std::max(worst, r.max_rel_err);
    if (!r.pass()) ok = false;
  }
  const double secs = elapsed_s(start);
  char detail[96];
  std::snprintf(detail, sizeof(detail), "(worst rel err %.2e, %.1fs)", worst, secs);
  report("gradient-correctness", ok && secs < 120.0, detail);
}

void check_cell_oracle() {
  double worst = 0.0;
  Rng rng(7);
  for (int n = 0; n < 100; ++n) {
    const std::size_t batch = 1 + rng.below(4);
    const std::size_t hidden = 1 + rng.below(8);
    const std::size_t input = 1 + rng.below(6);

    Tensor x({batch, input}), h({batch, hidden}), c({batch, hidden});
    for (double& v : x.vec()) v = rng.uniform(-2.0, 2.0);
    for (double& v : h.vec()) v = rng.uniform(-1.0, 1.0);
    for (double& v : c.vec()) v = rng.uniform(-1.0, 1.0);

    if (n % 2 == 0) {
      LstmParams p("p", input, hidden);
      p.init(rng);
      CellState out = lstm_step(x, {h, c}, p);
      oracle::CellOut ref = oracle::lstm_step_scalar(x, h, c, p);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < hidden; ++j) {
          worst = std::max(worst, std::fabs(out.h.at(b, j) - ref.h[b][j]));
          worst = std::max(worst, std::fabs(out.c.at(b, j) - ref.c[b][j]));
        }
    } else {
      GruParams p("p", input, hidden);
      p.init(rng);
      CellState out = gru_step(x, {h, Tensor{}}, p);
      oracle::CellOut ref = oracle::gru_step_scalar(x, h, p);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < hidden; ++j)
          worst = std::max(worst, std::fabs(out.h.at(b, j) - ref.h[b][j]));
    }
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "(max abs diff %.2e over 100 cases)", worst);
  report("cell-oracle", worst <= 1e-12, detail);
}

void check_tiny_overfit() {
  const auto start = Clock::now();

  // R/C scaling matters here: raw R values up to 50 saturate every gate at
  // init and the model never escapes the median predictor.
  std::vector<VentRecord> recs = flatten(synth_generate(32, 80, 42));
  recs = apply_scaler(recs, fit_scaler(recs, default_scaled_columns(true, true)));
  std::vector<BreathSequence> data = group_breaths(recs);

  HybridModel model = HybridModel::build(ModelConfig{}); // desk config
  FitOptions opts;
  opts.epochs = 200;
  opts.batch_size = 32; // full batch: smoothest descent on this tiny set
  opts.loss = LossKind::Mae;
  opts.lr = 2e-3;
  opts.seed = 42;
  TrainReport r = fit(model, data, {}, opts);

  const double secs = elapsed_s(start);
  const double first = r.history.front().train_mae;
  const double tenth = r.history[9].train_mae;
  const double final_mae = r.history.back().train_mae;
  const bool ok = final_mae < 0.05 && tenth < first && secs < 300.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "(mae ep1 %.4f, ep10 %.4f, ep200 %.4f, %.0fs)", first,
                tenth, final_mae, secs);
  report("tiny-overfit", ok, detail);
}

void check_census() {
  const Census c = HybridModel::build(ModelConfig{}).census();
  const bool ok = c.bilstm == 7 && c.bigru == 5 && c.multiply == 4 && c.batchnorm == 5;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "(bilstm=%zu bigru=%zu multiply=%zu batchnorm=%zu)",
                c.bilstm, c.bigru, c.multiply, c.batchnorm);
  report("architecture-census", ok, detail);
}

void check_param_accounting() {
  bool ok = lstm_layer_params(8, 16) == 1600;
  Rng rng(11);
  for (int i = 0; i < 5 && ok; ++i) {
    ModelConfig c;
    c.input_features = 1 + rng.below(6);
    c.stem_units = 1 + rng.below(6);
    for (auto& u : c.block_units) u = 1 + rng.below(6);
    c.tail_units = 1 + rng.below(6);
    c.dense_hidden = rng.below(6);
    c.seed = 100 + static_cast<std::uint64_t>(i);
    if (count_params(c) != HybridModel::build(c).flatten_params().size()) ok = false;
  }
  report("parameter-accounting", ok);
}

void check_scaler() {
  bool ok = true;

  std::vector<VentRecord> recs(5);
  for (std::size_t i = 0; i < 5; ++i) recs[i].u_in = static_cast<double>(i + 1);
  ScalerParams s = fit_scaler(recs, {"u_in"});
  auto scaled = apply_scaler(recs, s);
  const double expect[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (std::size_t i = 0; i < 5; ++i)
    if (scaled[i].u_in != expect[i]) ok = false;

  std::vector<VentRecord> synth = flatten(synth_generate(25, 40, 13));
  const auto columns = default_scaled_columns(false, true);
  auto rescaled = apply_scaler(synth, fit_scaler(synth, columns));
  for (const ColumnStats& c : fit_scaler(rescaled, columns).columns) {
    if (std::fabs(c.median) > 1e-12) ok = false;
    if (std::fabs(c.iqr - 1.0) > 1e-12) ok = false;
  }
  report("scaler-contract", ok);
}

void check_determinism() {
  RunConfig cfg;
  cfg.synth_breaths = 16;
  cfg.seq_len = 24;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 9;
  cfg.model.stem_units = 4;
  cfg.model.block_units = {4, 4, 4, 4};
  cfg.model.tail_units = 4;
  cfg.model.dense_hidden = 4;

  cfg.checkpoint_path = "acc_a.vseq";
  cfg.metrics_out = "acc_a_metrics.csv";
  cmd_train(cfg);
  RunConfig cfg2 = cfg;
  cfg2.checkpoint_path = "acc_b.vseq";
  cfg2.metrics_out = "acc_b_metrics.csv";
  cmd_train(cfg2);

  const bool ok = read_file("acc_a_metrics.csv") == read_file("acc_b_metrics.csv") &&
                  read_file("acc_a.vseq") == read_file("acc_b.vseq");
  for (const char* f : {"acc_a.vseq", "acc_b.vseq", "acc_a_metrics.csv", "acc_b_metrics.csv"})
    std::remove(f);
  report("determinism", ok);
}

void check_checkpoint_roundtrip() {
  ModelConfig cfg;
  cfg.stem_units = 4;
  cfg.block_units = {4, 4, 4, 4};
  cfg.tail_units = 4;
  cfg.dense_hidden = 4;
  cfg.seed = 17;
  HybridModel m = HybridModel::build(cfg);

  Rng rng(18);
  Tensor x({2, 12, cfg.input_features});
  for (double& v : x.vec()) v = rng.uniform(-1.0, 1.0);
  m.forward(x, true); // perturb running stats

  const std::string path = "acc_roundtrip.vseq";
  m.save(path);
  HybridModel loaded = HybridModel::load(path);
  std::remove(path.c_str());

  const bool ok = loaded.forward(x, false).vec() == m.forward(x, false).vec();
  report("checkpoint-roundtrip", ok);
}

} // namespace

int main() {
  check_gradcheck();
  check_cell_oracle();
  check_census();
  check_param_accounting();
  check_scaler();
  check_determinism();
  check_checkpoint_roundtrip();
  check_tiny_overfit();
  std::printf("%s\n", failures == 0 ? "ALL PASS" : "FAILURES PRESENT");
  return failures == 0 ? 0 : 1;
}
