#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ventseq/tensor.hpp"

namespace ventseq {

// Deterministic uniform(-k, k) stream, independent of libstdc++ distribution
// internals so seeded runs are reproducible everywhere.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64();
  double uniform01();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean, double sigma); // Box-Muller
  std::size_t below(std::size_t n);         // [0, n)

private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Learnable tensor plus its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { std::fill(grad.vec().begin(), grad.vec().end(), 0.0); }
  void init_uniform(Rng& rng, double k) {
    for (double& v : value.vec()) v = rng.uniform(-k, k);
  }
};

struct CellState {
  Tensor h; // [batch, hidden]
  Tensor c; // [batch, hidden]; empty for GRU
};

// LSTM weights: separate hidden-side and input-side matrices per gate.
struct LstmParams {
  Param W_fh, W_ih, W_ch, W_oh; // [hidden, hidden]
  Param W_fx, W_ix, W_cx, W_ox; // [hidden, input]
  Param b_f, b_i, b_c, b_o;     // [hidden]

  LstmParams() = default;
  LstmParams(const std::string& prefix, std::size_t input, std::size_t hidden);

  std::size_t hidden() const { return W_fh.value.dim(0); }
  std::size_t input() const { return W_fx.value.dim(1); }
  void init(Rng& rng);
  void collect(std::vector<Param*>& out);
};

// GRU weights: one matrix per gate over the concatenation [h_prev, x].
struct GruParams {
  Param W_r, W_z, W_h; // [hidden, hidden + input]
  Param b_r, b_z, b_h; // [hidden]

  GruParams() = default;
  GruParams(const std::string& prefix, std::size_t input, std::size_t hidden);

  std::size_t hidden() const { return W_r.value.dim(0); }
  std::size_t input() const { return W_r.value.dim(1) - hidden(); }
  void init(Rng& rng);
  void collect(std::vector<Param*>& out);
};

struct LstmStepCache {
  Tensor x, h_prev, c_prev;
  Tensor f, i, g, o; // post-activation gate values; g is the tanh candidate
  Tensor c, tanh_c;
  bool valid = false;
};

struct GruStepCache {
  Tensor x, h_prev;
  Tensor z_in;  // [h_prev, x]
  Tensor zr_in; // [r * h_prev, x]
  Tensor r, zg, hcand;
  bool valid = false;
};

// One LSTM timestep. Gates f,i,o via sigmoid, candidate via tanh,
// c_t = f*c_prev + i*cand, h_t = o*tanh(c_t).
CellState lstm_step(const Tensor& x, const CellState& state, const LstmParams& p,
                    LstmStepCache* cache = nullptr);

// Accumulates parameter gradients into p; dx/dh_prev/dc_prev are overwritten.
void lstm_step_backward(const LstmStepCache& cache, LstmParams& p,
                        const Tensor& grad_h, const Tensor& grad_c,
                        Tensor& dx, Tensor& dh_prev, Tensor& dc_prev);

// One GRU timestep: r,z gates, candidate over [r*h_prev, x],
// h_t = (1-z)*h_prev + z*cand.
CellState gru_step(const Tensor& x, const CellState& state, const GruParams& p,
                   GruStepCache* cache = nullptr);

void gru_step_backward(const GruStepCache& cache, GruParams& p,
                       const Tensor& grad_h, Tensor& dx, Tensor& dh_prev);

} // namespace ventseq
