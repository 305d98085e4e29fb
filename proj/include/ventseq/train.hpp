#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ventseq/model.hpp"

namespace ventseq {

enum class LossKind { Mae, Mse };

double mae(const Tensor& pred, const Tensor& actual);
double mse(const Tensor& pred, const Tensor& actual);
// mse: 2(pred-actual)/N ; mae: sign(pred-actual)/N with sign(0) = 0.
Tensor loss_backward(LossKind kind, const Tensor& pred, const Tensor& actual);

// Adam with bias correction, one (m, v) pair per parameter tensor.
class Adam {
public:
  explicit Adam(const std::vector<Param*>& params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(const std::vector<Param*>& params);
  std::size_t step_count() const { return step_; }
  double lr() const { return lr_; }

private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

struct EpochMetrics {
  double train_mae = 0.0, train_mse = 0.0;
  double val_mae = 0.0, val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0; // index into history; 0 when history empty
  double target_iqr = 1.0;    // scale factor from scaled units to cmH2O
  bool has_validation = false;
};

struct FitOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 512; // whole breaths per batch
  LossKind loss = LossKind::Mae;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::size_t early_stop_patience = 0; // 0 disables early stopping
};

// Epoch loop: seeded shuffle of breaths, minibatches of whole breaths,
// forward/backward/Adam, per-epoch train and validation MAE/MSE. Keeps the
// best-validation parameters and restores them before returning.
TrainReport fit(HybridModel& model, const std::vector<BreathSequence>& train_set,
                const std::vector<BreathSequence>& val_set, const FitOptions& opts);

// Evaluate MAE/MSE of the model over a dataset in infer mode.
std::pair<double, double> evaluate(HybridModel& model, const std::vector<BreathSequence>& data,
                                   std::size_t batch_size);

// metrics.csv: epoch,train_mae,train_mse,val_mae,val_mse,seconds — one row
// per epoch. Timing is zeroed by default so reruns are byte-identical.
void write_metrics_csv(const TrainReport& report, const std::string& path,
                       bool include_timing = false);

} // namespace ventseq
