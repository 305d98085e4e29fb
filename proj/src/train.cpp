#include "ventseq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <tuple>

namespace ventseq {

namespace {

void check_same_shape(const Tensor& pred, const Tensor& actual, const char* what) {
  if (!pred.same_shape(actual))
    throw DimensionError(std::string(what) + ": shapes " + pred.shape_str() + " vs " +
                         actual.shape_str());
}

} // namespace

double mae(const Tensor& pred, const Tensor& actual) {
  check_same_shape(pred, actual, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred[i] - actual[i]);
  return sum / static_cast<double>(pred.size());
}

double mse(const Tensor& pred, const Tensor& actual) {
  check_same_shape(pred, actual, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

Tensor loss_backward(LossKind kind, const Tensor& pred, const Tensor& actual) {
  check_same_shape(pred, actual, "loss_backward");
  const double invN = 1.0 / static_cast<double>(pred.size());
  Tensor g(pred.shape());
  if (kind == LossKind::Mse) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (pred[i] - actual[i]) * invN;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = pred[i] - actual[i];
      g[i] = d > 0.0 ? invN : (d < 0.0 ? -invN : 0.0);
    }
  }
  return g;
}

Adam::Adam(const std::vector<Param*>& params, double lr, double beta1, double beta2,
           double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Param* p : params) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step(const std::vector<Param*>& params) {
  if (params.size() != m_.size())
    throw UsageError("adam: parameter list does not match optimizer state");
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.grad.same_shape(p.value))
      throw UsageError("adam: grad shape mismatch for " + p.name);
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + p.name);
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][k] / bc1;
      const double vhat = v_[i][k] / bc2;
      p.value[k] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
  }
}

std::pair<double, double> evaluate(HybridModel& model, const std::vector<BreathSequence>& data,
                                   std::size_t batch_size) {
  if (data.empty()) return {0.0, 0.0};
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + batch_size, data.size()); ++i)
      idx.push_back(i);
    Tensor X, Y;
    pack_batch(data, idx, X, Y);
    Tensor pred = model.forward(X, /*train=*/false);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - Y[i];
      abs_sum += std::fabs(d);
      sq_sum += d * d;
      ++count;
    }
  }
  return {abs_sum / static_cast<double>(count), sq_sum / static_cast<double>(count)};
}

TrainReport fit(HybridModel& model, const std::vector<BreathSequence>& train_set,
                const std::vector<BreathSequence>& val_set, const FitOptions& opts) {
  if (train_set.empty()) throw UsageError("fit: empty training set");
  if (opts.batch_size < 1) throw UsageError("fit: batch_size must be >= 1");

  TrainReport report;
  report.has_validation = !val_set.empty();
  if (opts.epochs == 0) return report;

  std::vector<Param*> params = model.params();
  Adam adam(params, opts.lr);
  Rng shuffle_rng(opts.seed);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_metric = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Fisher-Yates with the deterministic stream
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t count = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size, ++batch_index) {
      std::vector<std::size_t> idx(order.begin() + start,
                                   order.begin() +
                                       std::min(start + opts.batch_size, order.size()));
      Tensor X, Y;
      pack_batch(train_set, idx, X, Y);
      Tensor pred = model.forward(X, /*train=*/true);
      const double batch_loss = opts.loss == LossKind::Mae ? mae(pred, Y) : mse(pred, Y);
      if (!std::isfinite(batch_loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                            ", batch " + std::to_string(batch_index));
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - Y[i];
        abs_sum += std::fabs(d);
        sq_sum += d * d;
        ++count;
      }
      model.zero_grads();
      model.backward(loss_backward(opts.loss, pred, Y));
      adam.step(params);
    }

    EpochMetrics m;
    m.train_mae = abs_sum / static_cast<double>(count);
    m.train_mse = sq_sum / static_cast<double>(count);
    if (report.has_validation)
      std::tie(m.val_mae, m.val_mse) = evaluate(model, val_set, opts.batch_size);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.history.push_back(m);

    const double metric = report.has_validation ? m.val_mae : m.train_mae;
    if (metric < best_metric) {
      best_metric = metric;
      report.best_epoch = report.history.size() - 1;
      epochs_since_best = 0;
      best_params.clear();
      for (const Param* p : params) best_params.push_back(p->value);
    } else {
      ++epochs_since_best;
      if (opts.early_stop_patience > 0 && epochs_since_best >= opts.early_stop_patience) break;
    }
  }

  if (!best_params.empty())
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  return report;
}

void write_metrics_csv(const TrainReport& report, const std::string& path, bool include_timing) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "epoch,train_mae,train_mse,val_mae,val_mse,seconds\n";
  char buf[192];
  for (std::size_t e = 0; e < report.history.size(); ++e) {
    const EpochMetrics& m = report.history[e];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.3f\n", e + 1, m.train_mae,
                  m.train_mse, m.val_mae, m.val_mse, include_timing ? m.seconds : 0.0);
    out << buf;
  }
}

} // namespace ventseq
