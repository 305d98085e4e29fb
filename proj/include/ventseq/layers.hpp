#pragma once

#include <utility>
#include <vector>

#include "ventseq/cells.hpp"

namespace ventseq {

enum class LayerKind { BiLstm, BiGru, Multiply, BatchNorm, Dense };

const char* layer_kind_name(LayerKind kind);

// Bidirectional recurrent layer over [batch, T, input]. Forward chain runs
// t = 0..T-1, backward chain t = T-1..0, both from zero state; per-timestep
// outputs are concatenated, so the output width is 2*hidden.
class BiRnnLayer {
public:
  BiRnnLayer() = default;
  BiRnnLayer(LayerKind kind, const std::string& name, std::size_t input, std::size_t hidden);

  LayerKind kind() const { return kind_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t input_size() const { return input_; }
  std::size_t output_width() const { return 2 * hidden_; }

  void init(Rng& rng);
  void collect_params(std::vector<Param*>& out);

  Tensor forward(const Tensor& seq, bool train);
  // Returns grad w.r.t. the input sequence; parameter grads accumulate.
  Tensor backward(const Tensor& grad_out);

private:
  LayerKind kind_ = LayerKind::BiLstm;
  std::size_t input_ = 0, hidden_ = 0;
  LstmParams lstm_fwd_, lstm_bwd_;
  GruParams gru_fwd_, gru_bwd_;
  std::vector<LstmStepCache> lstm_cache_fwd_, lstm_cache_bwd_;
  std::vector<GruStepCache> gru_cache_fwd_, gru_cache_bwd_;
  std::size_t cached_batch_ = 0, cached_T_ = 0;
  bool has_cache_ = false;
};

class MultiplyLayer {
public:
  Tensor forward(const Tensor& a, const Tensor& b, bool train);
  std::pair<Tensor, Tensor> backward(const Tensor& grad_out);

private:
  Tensor a_, b_;
  bool has_cache_ = false;
};

// Per-feature batch normalization over the flattened (batch, time) axes.
class BatchNormLayer {
public:
  BatchNormLayer() = default;
  BatchNormLayer(const std::string& name, std::size_t features);

  std::size_t features() const { return features_; }
  void collect_params(std::vector<Param*>& out);

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out, Tensor& grad_gamma, Tensor& grad_beta);
  Tensor backward(const Tensor& grad_out);

  double momentum = 0.9;
  double epsilon = 1e-5;

private:
  std::size_t features_ = 0;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  // train-mode cache
  Tensor x_, xhat_, mean_, inv_std_;
  bool has_cache_ = false;
};

enum class DenseAct { Linear, Selu };

// Time-distributed affine map with optional SELU.
class DenseLayer {
public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t input, std::size_t output, DenseAct activation);

  std::size_t input_size() const { return input_; }
  std::size_t output_size() const { return output_; }
  DenseAct activation() const { return act_; }

  void init(Rng& rng);
  void collect_params(std::vector<Param*>& out);

  Param& weight() { return W_; }
  Param& bias() { return b_; }

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);

private:
  std::size_t input_ = 0, output_ = 0;
  DenseAct act_ = DenseAct::Linear;
  Param W_, b_;
  Tensor x2_, pre_; // flattened input and pre-activation
  std::vector<std::size_t> in_shape_;
  bool has_cache_ = false;
};

} // namespace ventseq
