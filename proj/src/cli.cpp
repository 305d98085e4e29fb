#include "ventseq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "ventseq/gradcheck.hpp"

namespace ventseq {

namespace {

constexpr std::size_t kKaggleTrainRows = 6036000;
constexpr double kKaggleMinPressure = -1.8957;
constexpr double kKaggleMaxPressure = 64.8209;

void kaggle_ingest_check(const std::vector<VentRecord>& records) {
  if (records.size() != kKaggleTrainRows || !records.front().has_pressure) return;
  double lo = records.front().pressure, hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.pressure);
    hi = std::max(hi, r.pressure);
  }
  if (std::fabs(lo - kKaggleMinPressure) > 1e-4 || std::fabs(hi - kKaggleMaxPressure) > 1e-4)
    std::cerr << "warning: pressure extrema " << lo << " / " << hi
              << " differ from the expected -1.8957 / 64.8209 cmH2O\n";
}

struct Prepared {
  std::vector<BreathSequence> train, val;
  ScalerParams scaler;
  ImputeParams impute;
  double pressure_median = 0.0, pressure_iqr = 1.0;
};

std::vector<VentRecord> obtain_records(const RunConfig& cfg) {
  if (cfg.synth_breaths > 0)
    return flatten(synth_generate(cfg.synth_breaths, cfg.seq_len, cfg.seed));
  if (cfg.data_path.empty())
    throw UsageError("either --data or --synth is required");
  std::vector<VentRecord> records = load_csv(cfg.data_path);
  kaggle_ingest_check(records);
  return records;
}

// Deterministic split: last 10% of breaths by breath id go to validation.
Prepared prepare_training_data(std::vector<VentRecord> records, const RunConfig& cfg) {
  if (records.empty()) throw DataError("no training rows");
  if (!records.front().has_pressure) throw DataError("training data has no pressure column");

  std::set<long long> ids;
  for (const auto& r : records) ids.insert(r.breath_id);
  const std::size_t n_val = ids.size() / 10;
  std::set<long long> val_ids;
  for (auto it = ids.rbegin(); val_ids.size() < n_val; ++it) val_ids.insert(*it);

  std::vector<VentRecord> train_recs, val_recs;
  for (auto& r : records)
    (val_ids.count(r.breath_id) ? val_recs : train_recs).push_back(r);

  Prepared out;
  out.impute = fit_impute(train_recs);
  train_recs = apply_impute(std::move(train_recs), out.impute);
  val_recs = apply_impute(std::move(val_recs), out.impute);

  out.scaler = fit_scaler(train_recs, default_scaled_columns(cfg.scale_rc, true));
  train_recs = apply_scaler(std::move(train_recs), out.scaler);
  val_recs = apply_scaler(std::move(val_recs), out.scaler);

  if (const ColumnStats* p = out.scaler.find("pressure")) {
    out.pressure_median = p->median;
    out.pressure_iqr = p->iqr;
  }

  out.train = group_breaths(train_recs);
  if (!val_recs.empty()) out.val = group_breaths(val_recs);
  return out;
}

// Per-breath predictions in cmH2O, keyed by breath id.
std::map<long long, std::vector<double>> predict_breaths(HybridModel& model,
                                                         const std::vector<BreathSequence>& breaths,
                                                         std::size_t batch_size,
                                                         double pressure_median,
                                                         double pressure_iqr) {
  std::map<long long, std::vector<double>> out;
  for (std::size_t start = 0; start < breaths.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + batch_size, breaths.size()); ++i)
      idx.push_back(i);
    Tensor X, Y;
    pack_batch(breaths, idx, X, Y);
    Tensor pred = model.forward(X, /*train=*/false);
    const std::size_t T = pred.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::vector<double>& dst = out[breaths[idx[b]].breath_id];
      dst.resize(T);
      for (std::size_t t = 0; t < T; ++t)
        dst[t] = pred.at(b, t, 0) * pressure_iqr + pressure_median;
    }
  }
  return out;
}

struct MetricPair {
  double mae = 0.0, mse = 0.0;
};

// Scaled-unit metrics, optionally restricted to inspiratory (u_out == 0) steps.
MetricPair masked_metrics(HybridModel& model, const std::vector<BreathSequence>& breaths,
                          std::size_t batch_size, bool inspiratory_only) {
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < breaths.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + batch_size, breaths.size()); ++i)
      idx.push_back(i);
    Tensor X, Y;
    pack_batch(breaths, idx, X, Y);
    Tensor pred = model.forward(X, /*train=*/false);
    const std::size_t T = pred.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (std::size_t t = 0; t < T; ++t) {
        if (inspiratory_only && X.at(b, t, 4) != 0.0) continue;
        const double d = pred.at(b, t, 0) - Y.at(b, t, 0);
        abs_sum += std::fabs(d);
        sq_sum += d * d;
        ++count;
      }
  }
  if (count == 0) throw DataError("no timesteps selected for metric computation");
  return {abs_sum / static_cast<double>(count), sq_sum / static_cast<double>(count)};
}

ModelConfig model_config_for(const RunConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.input_features = kNumFeatures;
  mc.seed = cfg.seed;
  return mc;
}

} // namespace

int cmd_synth(const RunConfig& cfg) {
  const std::size_t n = cfg.synth_breaths > 0 ? cfg.synth_breaths : 64;
  write_csv(flatten(synth_generate(n, cfg.seq_len, cfg.seed)), cfg.synth_out);
  std::cout << "wrote " << n << " breaths x " << cfg.seq_len << " steps to " << cfg.synth_out
            << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  Prepared prep = prepare_training_data(obtain_records(cfg), cfg);

  HybridModel model = HybridModel::build(model_config_for(cfg));

  FitOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.loss = cfg.loss;
  opts.lr = cfg.lr;
  opts.seed = cfg.seed;
  opts.early_stop_patience = cfg.patience;

  TrainReport report = fit(model, prep.train, prep.val, opts);
  report.target_iqr = prep.pressure_iqr;

  model.save(cfg.checkpoint_path, &prep.scaler, &prep.impute);
  write_metrics_csv(report, cfg.metrics_out, cfg.include_timing);

  if (!report.history.empty()) {
    const EpochMetrics& last = report.history.back();
    std::printf("epochs: %zu  best epoch: %zu\n", report.history.size(), report.best_epoch + 1);
    std::printf("train mae: %.6f scaled  (%.6f cmH2O)\n", last.train_mae,
                last.train_mae * prep.pressure_iqr);
    std::printf("train mse: %.6f scaled  (%.6f cmH2O^2)\n", last.train_mse,
                last.train_mse * prep.pressure_iqr * prep.pressure_iqr);
    if (report.has_validation) {
      std::printf("val   mae: %.6f scaled  (%.6f cmH2O)\n", last.val_mae,
                  last.val_mae * prep.pressure_iqr);
      std::printf("val   mse: %.6f scaled  (%.6f cmH2O^2)\n", last.val_mse,
                  last.val_mse * prep.pressure_iqr * prep.pressure_iqr);
    }
  }
  std::cout << "checkpoint: " << cfg.checkpoint_path << "\nmetrics: " << cfg.metrics_out << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
  ScalerParams scaler;
  ImputeParams impute;
  HybridModel model = HybridModel::load(cfg.checkpoint_path, &scaler, &impute);

  std::vector<VentRecord> raw = obtain_records(cfg);
  if (raw.empty()) throw DataError("no rows to evaluate");
  if (!raw.front().has_pressure) throw DataError("eval needs labeled data with a pressure column");

  std::vector<VentRecord> scaled = apply_scaler(apply_impute(raw, impute), scaler);
  std::vector<BreathSequence> breaths = group_breaths(scaled);

  double pressure_median = 0.0, pressure_iqr = 1.0;
  if (const ColumnStats* p = scaler.find("pressure")) {
    pressure_median = p->median;
    pressure_iqr = p->iqr;
  }

  MetricPair m = masked_metrics(model, breaths, cfg.batch_size, cfg.mask_inspiratory);
  std::printf("mae: %.6f scaled  (%.6f cmH2O)\n", m.mae, m.mae * pressure_iqr);
  std::printf("mse: %.6f scaled  (%.6f cmH2O^2)\n", m.mse, m.mse * pressure_iqr * pressure_iqr);

  if (!cfg.pred_out.empty()) {
    auto preds = predict_breaths(model, breaths, cfg.batch_size, pressure_median, pressure_iqr);
    std::vector<BreathSequence> raw_breaths = group_breaths(raw);
    std::ofstream out(cfg.pred_out);
    if (!out) throw DataError("cannot write '" + cfg.pred_out + "'");
    out << "breath_id,time_step,actual,predicted\n";
    char buf[128];
    for (const auto& b : raw_breaths) {
      const std::vector<double>& p = preds.at(b.breath_id);
      for (std::size_t t = 0; t < p.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n", b.breath_id,
                      b.features.at(t, 2), b.target[t], p[t]);
        out << buf;
      }
    }
    std::cout << "predictions: " << cfg.pred_out << "\n";
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg) {
  ScalerParams scaler;
  ImputeParams impute;
  HybridModel model = HybridModel::load(cfg.checkpoint_path, &scaler, &impute);

  if (cfg.data_path.empty()) throw UsageError("predict needs --data");
  std::vector<VentRecord> raw = load_csv(cfg.data_path);
  if (raw.empty()) throw DataError("no rows to predict");
  if (raw.front().has_pressure)
    std::cerr << "warning: input has a pressure column; predicting from features only\n";

  std::vector<VentRecord> scaled = apply_scaler(apply_impute(raw, impute), scaler);

  double pressure_median = 0.0, pressure_iqr = 1.0;
  if (const ColumnStats* p = scaler.find("pressure")) {
    pressure_median = p->median;
    pressure_iqr = p->iqr;
  }

  // Group by breath while remembering each row's file position so the
  // output keeps input order.
  std::map<long long, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scaled.size(); ++i) groups[scaled[i].breath_id].push_back(i);
  std::size_t T = groups.begin()->second.size();
  for (const auto& [id, rows] : groups)
    if (rows.size() != T)
      throw DataError("breath " + std::to_string(id) + " has a different length");

  std::vector<double> row_pred(scaled.size(), 0.0);
  std::vector<long long> batch_ids;
  std::vector<BreathSequence> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    std::vector<std::size_t> idx(batch.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Tensor X, Y;
    pack_batch(batch, idx, X, Y);
    Tensor pred = model.forward(X, /*train=*/false);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& rows = groups.at(batch_ids[b]);
      for (std::size_t t = 0; t < T; ++t)
        row_pred[rows[t]] = pred.at(b, t, 0) * pressure_iqr + pressure_median;
    }
    batch.clear();
    batch_ids.clear();
  };

  for (auto& [id, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return scaled[a].time_step < scaled[b].time_step;
    });
    BreathSequence seq;
    seq.breath_id = id;
    seq.features = Tensor({T, kNumFeatures});
    for (std::size_t t = 0; t < T; ++t) {
      const VentRecord& r = scaled[rows[t]];
      seq.features.at(t, 0) = r.R;
      seq.features.at(t, 1) = r.C;
      seq.features.at(t, 2) = r.time_step;
      seq.features.at(t, 3) = r.u_in;
      seq.features.at(t, 4) = r.u_out;
    }
    batch.push_back(std::move(seq));
    batch_ids.push_back(id);
    if (batch.size() == cfg.batch_size) flush();
  }
  flush();

  const std::string out_path = cfg.pred_out.empty() ? "predictions.csv" : cfg.pred_out;
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out << "id,pressure\n";
  char buf[64];
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g\n", raw[i].id, row_pred[i]);
    out << buf;
  }
  std::cout << "predictions: " << out_path << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg) {
  bool all_pass = true;
  for (const GradCheckResult& r : run_gradcheck(cfg.seed, cfg.fault_inject)) {
    std::printf("%-20s max rel err %.3e  (threshold %.0e)  %s\n", r.component.c_str(),
                r.max_rel_err, r.threshold, r.pass() ? "PASS" : "FAIL");
    if (!r.pass()) all_pass = false;
  }
  return all_pass ? kExitOk : kExitFail;
}

int cmd_params(const RunConfig& cfg) {
  const ModelConfig mc = model_config_for(cfg);
  HybridModel model = HybridModel::build(mc);

  std::printf("%-14s %-10s %8s\n", "layer", "kind", "params");
  std::size_t total = 0;
  for (auto& node : model.nodes()) {
    std::vector<Param*> ps;
    if (auto* rnn = std::get_if<BiRnnLayer>(&node.impl)) rnn->collect_params(ps);
    if (auto* bn = std::get_if<BatchNormLayer>(&node.impl)) bn->collect_params(ps);
    if (auto* dense = std::get_if<DenseLayer>(&node.impl)) dense->collect_params(ps);
    std::size_t n = 0;
    for (Param* p : ps) n += p->value.size();
    total += n;
    std::printf("%-14s %-10s %8zu\n", node.name.c_str(), layer_kind_name(node.kind), n);
  }
  const Census c = model.census();
  std::printf("census: bilstm=%zu bigru=%zu multiply=%zu batchnorm=%zu\n", c.bilstm, c.bigru,
              c.multiply, c.batchnorm);
  std::printf("total params: %zu\n", total);
  if (total != count_params(mc)) {
    std::cerr << "error: closed-form count " << count_params(mc) << " != enumerated " << total
              << "\n";
    return kExitFail;
  }
  return kExitOk;
}

} // namespace ventseq
