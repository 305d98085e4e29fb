#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ventseq/data.hpp"
#include "ventseq/layers.hpp"

namespace ventseq {

struct ModelConfig {
  std::size_t input_features = kNumFeatures;
  std::size_t stem_units = 16;
  std::array<std::size_t, 4> block_units = {16, 16, 16, 16};
  std::size_t tail_units = 16;
  std::size_t dense_hidden = 32; // 0 disables the SELU hidden layer
  std::uint64_t seed = 42;
};

struct Census {
  std::size_t bilstm = 0, bigru = 0, multiply = 0, batchnorm = 0, dense = 0;
  bool operator==(const Census&) const = default;
};

// Hybrid network: two-layer Bi-LSTM stem, four fusion blocks (parallel
// Bi-LSTM / Bi-GRU branches joined by multiply, then batchnorm), a
// Bi-LSTM -> Bi-GRU -> batchnorm tail, and a dense head ending in one
// linear output per timestep.
class HybridModel {
public:
  struct Node {
    LayerKind kind;
    std::string name;
    std::vector<int> inputs; // node ids; -1 is the model input
    std::variant<BiRnnLayer, MultiplyLayer, BatchNormLayer, DenseLayer> impl;
  };

  static HybridModel build(const ModelConfig& config);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }
  Census census() const;

  // [batch, T, input_features] -> [batch, T, 1]. Train mode caches
  // intermediates for backward and updates batchnorm running stats.
  Tensor forward(const Tensor& x, bool train);
  void backward(const Tensor& grad_out);

  std::vector<Param*> params();
  void zero_grads();
  std::vector<double> flatten_params();

  void save(const std::string& path, const ScalerParams* scaler = nullptr,
            const ImputeParams* impute = nullptr);
  static HybridModel load(const std::string& path, ScalerParams* scaler_out = nullptr,
                          ImputeParams* impute_out = nullptr);

private:
  ModelConfig cfg_;
  std::vector<Node> nodes_;
  bool has_cache_ = false;
  std::size_t cached_batch_ = 0, cached_T_ = 0;

  void check_census() const;
  std::vector<const Tensor*> running_stats() const;
  std::vector<Tensor*> running_stats();
};

// Closed-form parameter count of the pinned topology.
std::size_t count_params(const ModelConfig& config);

// Per-layer building blocks of the closed form.
std::size_t lstm_layer_params(std::size_t input, std::size_t hidden);
std::size_t gru_layer_params(std::size_t input, std::size_t hidden);

} // namespace ventseq
