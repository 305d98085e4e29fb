#include "ventseq/gradcheck.hpp"

#include <cmath>

#include "ventseq/cells.hpp"
#include "ventseq/layers.hpp"
#include "ventseq/model.hpp"
#include "ventseq/train.hpp"

namespace ventseq {

namespace {

constexpr double kLayerTol = 1e-5;
constexpr double kGraphTol = 1e-4;

Tensor randn(Rng& rng, std::vector<std::size_t> shape, double sigma = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.vec()) v = rng.normal(0.0, sigma);
  return t;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
  return s;
}

} // namespace

double fd_max_rel_err(const std::vector<Tensor*>& tensors,
                      const std::vector<const Tensor*>& analytic,
                      const std::function<double()>& loss, double h) {
  if (tensors.size() != analytic.size())
    throw UsageError("fd_max_rel_err: tensor/gradient list size mismatch");
  double worst = 0.0;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Tensor& t = *tensors[ti];
    const Tensor& g = *analytic[ti];
    if (!t.same_shape(g))
      throw UsageError("fd_max_rel_err: gradient shape mismatch at index " + std::to_string(ti));
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double orig = t[k];
      t[k] = orig + h;
      const double up = loss();
      t[k] = orig - h;
      const double down = loss();
      t[k] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::fabs(numeric - g[k]) / (std::fabs(numeric) + std::fabs(g[k]) + 1e-8);
      if (err > worst) worst = err;
    }
  }
  return worst;
}

namespace {

GradCheckResult check_lstm_step(Rng& rng) {
  const std::size_t batch = 3, input = 2, hidden = 4;
  LstmParams p("p", input, hidden);
  p.init(rng);
  Tensor x = randn(rng, {batch, input});
  CellState st{randn(rng, {batch, hidden}, 0.5), randn(rng, {batch, hidden}, 0.5)};
  Tensor wh = randn(rng, {batch, hidden});
  Tensor wc = randn(rng, {batch, hidden});

  LstmStepCache cache;
  lstm_step(x, st, p, &cache);
  std::vector<Param*> ps;
  p.collect(ps);
  for (Param* q : ps) q->zero_grad();
  Tensor dx, dh_prev, dc_prev;
  lstm_step_backward(cache, p, wh, wc, dx, dh_prev, dc_prev);

  std::vector<Tensor*> tensors = {&x, &st.h, &st.c};
  std::vector<const Tensor*> grads = {&dx, &dh_prev, &dc_prev};
  for (Param* q : ps) {
    tensors.push_back(&q->value);
    grads.push_back(&q->grad);
  }
  auto loss = [&] {
    CellState out = lstm_step(x, st, p);
    return weighted_sum(out.h, wh) + weighted_sum(out.c, wc);
  };
  return {"lstm_step", fd_max_rel_err(tensors, grads, loss), kLayerTol};
}

GradCheckResult check_gru_step(Rng& rng) {
  const std::size_t batch = 3, input = 2, hidden = 4;
  GruParams p("p", input, hidden);
  p.init(rng);
  Tensor x = randn(rng, {batch, input});
  CellState st{randn(rng, {batch, hidden}, 0.5), Tensor{}};
  Tensor wh = randn(rng, {batch, hidden});

  GruStepCache cache;
  gru_step(x, st, p, &cache);
  std::vector<Param*> ps;
  p.collect(ps);
  for (Param* q : ps) q->zero_grad();
  Tensor dx, dh_prev;
  gru_step_backward(cache, p, wh, dx, dh_prev);

  std::vector<Tensor*> tensors = {&x, &st.h};
  std::vector<const Tensor*> grads = {&dx, &dh_prev};
  for (Param* q : ps) {
    tensors.push_back(&q->value);
    grads.push_back(&q->grad);
  }
  auto loss = [&] { return weighted_sum(gru_step(x, st, p).h, wh); };
  return {"gru_step", fd_max_rel_err(tensors, grads, loss), kLayerTol};
}

GradCheckResult check_bidirectional(LayerKind kind, Rng& rng) {
  const std::size_t batch = 2, T = 5, input = 3, hidden = 3;
  BiRnnLayer layer(kind, "bi", input, hidden);
  layer.init(rng);
  Tensor seq = randn(rng, {batch, T, input});
  Tensor w = randn(rng, {batch, T, 2 * hidden});

  std::vector<Param*> ps;
  layer.collect_params(ps);
  for (Param* q : ps) q->zero_grad();
  layer.forward(seq, /*train=*/true);
  Tensor dseq = layer.backward(w);

  std::vector<Tensor*> tensors = {&seq};
  std::vector<const Tensor*> grads = {&dseq};
  for (Param* q : ps) {
    tensors.push_back(&q->value);
    grads.push_back(&q->grad);
  }
  auto loss = [&] { return weighted_sum(layer.forward(seq, false), w); };
  const char* name = kind == LayerKind::BiLstm ? "bidirectional_lstm" : "bidirectional_gru";
  return {name, fd_max_rel_err(tensors, grads, loss), kLayerTol};
}

GradCheckResult check_multiply(Rng& rng) {
  Tensor a = randn(rng, {2, 4, 3});
  Tensor b = randn(rng, {2, 4, 3});
  Tensor w = randn(rng, {2, 4, 3});
  MultiplyLayer layer;
  layer.forward(a, b, true);
  auto [da, db] = layer.backward(w);
  std::vector<Tensor*> tensors = {&a, &b};
  std::vector<const Tensor*> grads = {&da, &db};
  auto loss = [&] {
    MultiplyLayer l2;
    return weighted_sum(l2.forward(a, b, false), w);
  };
  return {"multiply", fd_max_rel_err(tensors, grads, loss), kLayerTol};
}

GradCheckResult check_batchnorm(Rng& rng) {
  const std::size_t features = 4;
  BatchNormLayer layer("bn", features);
  for (std::size_t f = 0; f < features; ++f) {
    layer.gamma().value[f] = rng.uniform(0.5, 1.5);
    layer.beta().value[f] = rng.uniform(-0.5, 0.5);
  }
  Tensor x = randn(rng, {3, 5, features});
  Tensor w = randn(rng, {3, 5, features});

  layer.forward(x, true);
  Tensor dgamma, dbeta;
  Tensor dx = layer.backward(w, dgamma, dbeta);

  std::vector<Tensor*> tensors = {&x, &layer.gamma().value, &layer.beta().value};
  std::vector<const Tensor*> grads = {&dx, &dgamma, &dbeta};
  auto loss = [&] { return weighted_sum(layer.forward(x, true), w); };
  return {"batchnorm", fd_max_rel_err(tensors, grads, loss), kLayerTol};
}

GradCheckResult check_dense(Rng& rng) {
  DenseLayer layer("d", 4, 3, DenseAct::Selu);
  layer.init(rng);
  Tensor x = randn(rng, {2, 5, 4});
  Tensor w = randn(rng, {2, 5, 3});

  std::vector<Param*> ps;
  layer.collect_params(ps);
  for (Param* q : ps) q->zero_grad();
  layer.forward(x, true);
  Tensor dx = layer.backward(w);

  std::vector<Tensor*> tensors = {&x};
  std::vector<const Tensor*> grads = {&dx};
  for (Param* q : ps) {
    tensors.push_back(&q->value);
    grads.push_back(&q->grad);
  }
  auto loss = [&] { return weighted_sum(layer.forward(x, false), w); };
  return {"dense", fd_max_rel_err(tensors, grads, loss), kLayerTol};
}

GradCheckResult check_losses(Rng& rng) {
  // keep |pred-actual| away from the MAE kink so the difference quotient is clean
  Tensor pred = randn(rng, {3, 4});
  Tensor actual = pred;
  for (double& v : actual.vec()) v += (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.0);

  double worst = 0.0;
  for (LossKind kind : {LossKind::Mse, LossKind::Mae}) {
    Tensor g = loss_backward(kind, pred, actual);
    std::vector<Tensor*> tensors = {&pred};
    std::vector<const Tensor*> grads = {&g};
    auto loss = [&] { return kind == LossKind::Mse ? mse(pred, actual) : mae(pred, actual); };
    worst = std::max(worst, fd_max_rel_err(tensors, grads, loss));
  }
  return {"losses", worst, kLayerTol};
}

GradCheckResult check_full_graph(Rng& rng) {
  ModelConfig cfg;
  cfg.input_features = 2;
  cfg.stem_units = 2;
  cfg.block_units = {2, 2, 2, 2};
  cfg.tail_units = 2;
  cfg.dense_hidden = 3;
  cfg.seed = rng.next_u64();
  HybridModel model = HybridModel::build(cfg);

  Tensor x = randn(rng, {2, 3, 2});
  Tensor y = randn(rng, {2, 3, 1});

  model.zero_grads();
  Tensor pred = model.forward(x, true);
  model.backward(loss_backward(LossKind::Mse, pred, y));

  std::vector<Param*> ps = model.params();
  std::vector<Tensor> saved_grads;
  saved_grads.reserve(ps.size());
  for (Param* p : ps) saved_grads.push_back(p->grad);

  std::vector<Tensor*> tensors;
  std::vector<const Tensor*> grads;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    tensors.push_back(&ps[i]->value);
    grads.push_back(&saved_grads[i]);
  }
  // A slightly larger step keeps cancellation noise below the threshold for
  // the tiny gradients that survive 17 layers of chain rule.
  auto loss = [&] { return mse(model.forward(x, true), y); };
  return {"full_graph", fd_max_rel_err(tensors, grads, loss, 1e-5), kGraphTol};
}

} // namespace

std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, bool fault_inject) {
  Rng rng(seed);
  std::vector<GradCheckResult> results;
  results.push_back(check_lstm_step(rng));
  results.push_back(check_gru_step(rng));
  results.push_back(check_bidirectional(LayerKind::BiLstm, rng));
  results.push_back(check_bidirectional(LayerKind::BiGru, rng));
  results.push_back(check_multiply(rng));
  results.push_back(check_batchnorm(rng));
  results.push_back(check_dense(rng));
  results.push_back(check_losses(rng));
  results.push_back(check_full_graph(rng));
  if (fault_inject && !results.empty()) {
    results.front().max_rel_err += 10.0 * results.front().threshold;
    results.front().component += " (fault injected)";
  }
  return results;
}

} // namespace ventseq
