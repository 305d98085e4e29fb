#include "ventseq/layers.hpp"

#include <cmath>

#include "ventseq/activations.hpp"

namespace ventseq {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::BiLstm: return "bilstm";
    case LayerKind::BiGru: return "bigru";
    case LayerKind::Multiply: return "multiply";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

namespace {

Tensor slice_step(const Tensor& seq, std::size_t t) {
  const std::size_t batch = seq.dim(0), T = seq.dim(1), feat = seq.dim(2);
  Tensor x({batch, feat});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < feat; ++f) x.at(b, f) = seq.at(b, t, f);
  (void)T;
  return x;
}

} // namespace

BiRnnLayer::BiRnnLayer(LayerKind kind, const std::string& name, std::size_t input,
                       std::size_t hidden)
    : kind_(kind), input_(input), hidden_(hidden) {
  if (kind == LayerKind::BiLstm) {
    lstm_fwd_ = LstmParams(name + ".fwd", input, hidden);
    lstm_bwd_ = LstmParams(name + ".bwd", input, hidden);
  } else if (kind == LayerKind::BiGru) {
    gru_fwd_ = GruParams(name + ".fwd", input, hidden);
    gru_bwd_ = GruParams(name + ".bwd", input, hidden);
  } else {
    throw UsageError("BiRnnLayer: kind must be bilstm or bigru");
  }
}

void BiRnnLayer::init(Rng& rng) {
  if (kind_ == LayerKind::BiLstm) {
    lstm_fwd_.init(rng);
    lstm_bwd_.init(rng);
  } else {
    gru_fwd_.init(rng);
    gru_bwd_.init(rng);
  }
}

void BiRnnLayer::collect_params(std::vector<Param*>& out) {
  if (kind_ == LayerKind::BiLstm) {
    lstm_fwd_.collect(out);
    lstm_bwd_.collect(out);
  } else {
    gru_fwd_.collect(out);
    gru_bwd_.collect(out);
  }
}

Tensor BiRnnLayer::forward(const Tensor& seq, bool train) {
  if (seq.rank() != 3 || seq.dim(2) != input_)
    throw DimensionError("bidirectional forward: input " + seq.shape_str() +
                         " incompatible with layer input width " + std::to_string(input_));
  const std::size_t batch = seq.dim(0), T = seq.dim(1);
  const bool is_lstm = kind_ == LayerKind::BiLstm;

  if (train) {
    cached_batch_ = batch;
    cached_T_ = T;
    if (is_lstm) {
      lstm_cache_fwd_.assign(T, {});
      lstm_cache_bwd_.assign(T, {});
    } else {
      gru_cache_fwd_.assign(T, {});
      gru_cache_bwd_.assign(T, {});
    }
    has_cache_ = true;
  } else {
    has_cache_ = false;
  }

  Tensor out({batch, T, 2 * hidden_});

  // forward chain, t ascending
  CellState st{Tensor({batch, hidden_}), is_lstm ? Tensor({batch, hidden_}) : Tensor{}};
  for (std::size_t t = 0; t < T; ++t) {
    Tensor x = slice_step(seq, t);
    if (is_lstm)
      st = lstm_step(x, st, lstm_fwd_, train ? &lstm_cache_fwd_[t] : nullptr);
    else
      st = gru_step(x, st, gru_fwd_, train ? &gru_cache_fwd_[t] : nullptr);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < hidden_; ++j) out.at(b, t, j) = st.h.at(b, j);
  }

  // backward chain, t descending
  st = CellState{Tensor({batch, hidden_}), is_lstm ? Tensor({batch, hidden_}) : Tensor{}};
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = T - 1 - s;
    Tensor x = slice_step(seq, t);
    if (is_lstm)
      st = lstm_step(x, st, lstm_bwd_, train ? &lstm_cache_bwd_[s] : nullptr);
    else
      st = gru_step(x, st, gru_bwd_, train ? &gru_cache_bwd_[s] : nullptr);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < hidden_; ++j) out.at(b, t, hidden_ + j) = st.h.at(b, j);
  }
  return out;
}

Tensor BiRnnLayer::backward(const Tensor& grad_out) {
  if (!has_cache_) throw UsageError("bidirectional backward: no forward cache");
  const std::size_t batch = cached_batch_, T = cached_T_;
  if (grad_out.rank() != 3 || grad_out.dim(0) != batch || grad_out.dim(1) != T ||
      grad_out.dim(2) != 2 * hidden_)
    throw DimensionError("bidirectional backward: grad " + grad_out.shape_str() +
                         " does not match cached forward");
  const bool is_lstm = kind_ == LayerKind::BiLstm;

  Tensor grad_seq({batch, T, input_});
  auto add_to_seq = [&](const Tensor& dx, std::size_t t) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t f = 0; f < input_; ++f) grad_seq.at(b, t, f) += dx.at(b, f);
  };
  auto upstream_half = [&](std::size_t t, std::size_t offset) {
    Tensor dh({batch, hidden_});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < hidden_; ++j) dh.at(b, j) = grad_out.at(b, t, offset + j);
    return dh;
  };

  // forward chain, reverse time
  {
    Tensor dh_rec({batch, hidden_}), dc_rec({batch, hidden_});
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = T - 1 - s;
      Tensor dh = ew(EwOp::Add, upstream_half(t, 0), dh_rec);
      Tensor dx, dh_prev, dc_prev;
      if (is_lstm) {
        lstm_step_backward(lstm_cache_fwd_[t], lstm_fwd_, dh, dc_rec, dx, dh_prev, dc_prev);
        dc_rec = std::move(dc_prev);
      } else {
        gru_step_backward(gru_cache_fwd_[t], gru_fwd_, dh, dx, dh_prev);
      }
      dh_rec = std::move(dh_prev);
      add_to_seq(dx, t);
    }
  }

  // backward chain: its step s consumed timestep T-1-s, so unroll s descending.
  {
    Tensor dh_rec({batch, hidden_}), dc_rec({batch, hidden_});
    for (std::size_t s2 = 0; s2 < T; ++s2) {
      const std::size_t s = T - 1 - s2;
      const std::size_t t = T - 1 - s;
      Tensor dh = ew(EwOp::Add, upstream_half(t, hidden_), dh_rec);
      Tensor dx, dh_prev, dc_prev;
      if (is_lstm) {
        lstm_step_backward(lstm_cache_bwd_[s], lstm_bwd_, dh, dc_rec, dx, dh_prev, dc_prev);
        dc_rec = std::move(dc_prev);
      } else {
        gru_step_backward(gru_cache_bwd_[s], gru_bwd_, dh, dx, dh_prev);
      }
      dh_rec = std::move(dh_prev);
      add_to_seq(dx, t);
    }
  }

  has_cache_ = false;
  return grad_seq;
}

Tensor MultiplyLayer::forward(const Tensor& a, const Tensor& b, bool train) {
  Tensor out = ew(EwOp::Mul, a, b);
  if (train) {
    a_ = a;
    b_ = b;
    has_cache_ = true;
  }
  return out;
}

std::pair<Tensor, Tensor> MultiplyLayer::backward(const Tensor& grad_out) {
  if (!has_cache_) throw UsageError("multiply backward: no forward cache");
  has_cache_ = false;
  return {ew(EwOp::Mul, grad_out, b_), ew(EwOp::Mul, grad_out, a_)};
}

BatchNormLayer::BatchNormLayer(const std::string& name, std::size_t features)
    : features_(features),
      gamma_(name + ".gamma", {features}),
      beta_(name + ".beta", {features}),
      running_mean_({features}),
      running_var_({features}) {
  std::fill(gamma_.value.vec().begin(), gamma_.value.vec().end(), 1.0);
  std::fill(running_var_.vec().begin(), running_var_.vec().end(), 1.0);
}

void BatchNormLayer::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

Tensor BatchNormLayer::forward(const Tensor& x, bool train) {
  if (x.rank() < 2 || x.dim(x.rank() - 1) != features_)
    throw DimensionError("batchnorm: input " + x.shape_str() + " last dim != " +
                         std::to_string(features_));
  const std::size_t N = x.size() / features_;
  Tensor out(x.shape());

  if (train) {
    if (N < 2) throw UsageError("batchnorm train mode needs at least 2 samples per feature");
    Tensor mean({features_}), var({features_});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < features_; ++f) mean[f] += x[n * features_ + f];
    for (std::size_t f = 0; f < features_; ++f) mean[f] /= static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < features_; ++f) {
        const double d = x[n * features_ + f] - mean[f];
        var[f] += d * d;
      }
    for (std::size_t f = 0; f < features_; ++f) var[f] /= static_cast<double>(N);

    Tensor inv_std({features_});
    for (std::size_t f = 0; f < features_; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + epsilon);

    xhat_ = Tensor(x.shape());
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < features_; ++f) {
        const double xh = (x[n * features_ + f] - mean[f]) * inv_std[f];
        xhat_[n * features_ + f] = xh;
        out[n * features_ + f] = gamma_.value[f] * xh + beta_.value[f];
      }

    for (std::size_t f = 0; f < features_; ++f) {
      running_mean_[f] = momentum * running_mean_[f] + (1.0 - momentum) * mean[f];
      running_var_[f] = momentum * running_var_[f] + (1.0 - momentum) * var[f];
    }

    x_ = x;
    mean_ = std::move(mean);
    inv_std_ = std::move(inv_std);
    has_cache_ = true;
  } else {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < features_; ++f) {
        const double xh =
            (x[n * features_ + f] - running_mean_[f]) / std::sqrt(running_var_[f] + epsilon);
        out[n * features_ + f] = gamma_.value[f] * xh + beta_.value[f];
      }
  }
  return out;
}

Tensor BatchNormLayer::backward(const Tensor& grad_out, Tensor& grad_gamma, Tensor& grad_beta) {
  if (!has_cache_) throw UsageError("batchnorm backward: no train-mode forward cache");
  if (!grad_out.same_shape(x_))
    throw DimensionError("batchnorm backward: grad " + grad_out.shape_str() +
                         " does not match cached input " + x_.shape_str());
  const std::size_t N = x_.size() / features_;

  grad_gamma = Tensor({features_});
  grad_beta = Tensor({features_});
  Tensor sum_dxhat({features_}), sum_dxhat_xhat({features_});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < features_; ++f) {
      const double dy = grad_out[n * features_ + f];
      const double xh = xhat_[n * features_ + f];
      grad_beta[f] += dy;
      grad_gamma[f] += dy * xh;
      const double dxh = dy * gamma_.value[f];
      sum_dxhat[f] += dxh;
      sum_dxhat_xhat[f] += dxh * xh;
    }

  Tensor dx(x_.shape());
  const double invN = 1.0 / static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < features_; ++f) {
      const double dxh = grad_out[n * features_ + f] * gamma_.value[f];
      const double xh = xhat_[n * features_ + f];
      dx[n * features_ + f] =
          inv_std_[f] * (dxh - invN * sum_dxhat[f] - invN * xh * sum_dxhat_xhat[f]);
    }
  has_cache_ = false;
  return dx;
}

Tensor BatchNormLayer::backward(const Tensor& grad_out) {
  Tensor gg, gb;
  Tensor dx = backward(grad_out, gg, gb);
  for (std::size_t f = 0; f < features_; ++f) {
    gamma_.grad[f] += gg[f];
    beta_.grad[f] += gb[f];
  }
  return dx;
}

DenseLayer::DenseLayer(const std::string& name, std::size_t input, std::size_t output,
                       DenseAct activation)
    : input_(input), output_(output), act_(activation),
      W_(name + ".W", {output, input}), b_(name + ".b", {output}) {}

void DenseLayer::init(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(input_));
  W_.init_uniform(rng, k);
  b_.init_uniform(rng, k);
}

void DenseLayer::collect_params(std::vector<Param*>& out) {
  out.push_back(&W_);
  out.push_back(&b_);
}

Tensor DenseLayer::forward(const Tensor& x, bool train) {
  if (x.dim(x.rank() - 1) != input_)
    throw DimensionError("dense: input " + x.shape_str() + " last dim != " +
                         std::to_string(input_));
  const std::size_t N = x.size() / input_;
  Tensor x2({N, input_}, x.vec());
  Tensor pre = linear(x2, W_.value, b_.value);
  Tensor out = pre;
  if (act_ == DenseAct::Selu)
    for (double& v : out.vec()) v = act::selu(v);

  std::vector<std::size_t> out_shape(x.shape());
  out_shape.back() = output_;
  Tensor shaped(out_shape, std::move(out.vec()));

  if (train) {
    x2_ = std::move(x2);
    pre_ = std::move(pre);
    in_shape_ = x.shape();
    has_cache_ = true;
  }
  return shaped;
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
  if (!has_cache_) throw UsageError("dense backward: no forward cache");
  const std::size_t N = x2_.dim(0);
  Tensor dpre({N, output_}, grad_out.vec());
  if (act_ == DenseAct::Selu)
    for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= act::selu_deriv(pre_[i]);

  Tensor dx2({N, input_});
  linear_backward(x2_, W_.value, dpre, dx2, W_.grad, b_.grad);
  has_cache_ = false;
  return Tensor(in_shape_, std::move(dx2.vec()));
}

} // namespace ventseq
