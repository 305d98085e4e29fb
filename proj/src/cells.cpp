#include "ventseq/cells.hpp"

#include <cmath>

#include "ventseq/activations.hpp"

namespace ventseq {

std::uint64_t Rng::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal(double mean, double sigma) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + sigma * spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double two_pi = 6.283185307179586476925286766559;
  spare_ = mag * std::sin(two_pi * u2);
  has_spare_ = true;
  return mean + sigma * mag * std::cos(two_pi * u2);
}

std::size_t Rng::below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

LstmParams::LstmParams(const std::string& prefix, std::size_t input, std::size_t hidden)
    : W_fh(prefix + ".W_fh", {hidden, hidden}),
      W_ih(prefix + ".W_ih", {hidden, hidden}),
      W_ch(prefix + ".W_ch", {hidden, hidden}),
      W_oh(prefix + ".W_oh", {hidden, hidden}),
      W_fx(prefix + ".W_fx", {hidden, input}),
      W_ix(prefix + ".W_ix", {hidden, input}),
      W_cx(prefix + ".W_cx", {hidden, input}),
      W_ox(prefix + ".W_ox", {hidden, input}),
      b_f(prefix + ".b_f", {hidden}),
      b_i(prefix + ".b_i", {hidden}),
      b_c(prefix + ".b_c", {hidden}),
      b_o(prefix + ".b_o", {hidden}) {}

void LstmParams::init(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden()));
  for (Param* p : {&W_fh, &W_ih, &W_ch, &W_oh, &W_fx, &W_ix, &W_cx, &W_ox, &b_f, &b_i, &b_c, &b_o})
    p->init_uniform(rng, k);
}

void LstmParams::collect(std::vector<Param*>& out) {
  for (Param* p : {&W_fh, &W_ih, &W_ch, &W_oh, &W_fx, &W_ix, &W_cx, &W_ox, &b_f, &b_i, &b_c, &b_o})
    out.push_back(p);
}

GruParams::GruParams(const std::string& prefix, std::size_t input, std::size_t hidden)
    : W_r(prefix + ".W_r", {hidden, hidden + input}),
      W_z(prefix + ".W_z", {hidden, hidden + input}),
      W_h(prefix + ".W_h", {hidden, hidden + input}),
      b_r(prefix + ".b_r", {hidden}),
      b_z(prefix + ".b_z", {hidden}),
      b_h(prefix + ".b_h", {hidden}) {}

void GruParams::init(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden()));
  for (Param* p : {&W_r, &W_z, &W_h, &b_r, &b_z, &b_h}) p->init_uniform(rng, k);
}

void GruParams::collect(std::vector<Param*>& out) {
  for (Param* p : {&W_r, &W_z, &W_h, &b_r, &b_z, &b_h}) out.push_back(p);
}

namespace {

void check_step_shapes(const Tensor& x, const CellState& state, std::size_t input,
                       std::size_t hidden, const char* what) {
  if (x.rank() != 2 || x.dim(1) != input)
    throw DimensionError(std::string(what) + ": input " + x.shape_str() +
                         " incompatible with cell input width " + std::to_string(input));
  if (state.h.rank() != 2 || state.h.dim(0) != x.dim(0) || state.h.dim(1) != hidden)
    throw DimensionError(std::string(what) + ": state h " + state.h.shape_str() +
                         " incompatible with batch " + std::to_string(x.dim(0)) +
                         ", hidden " + std::to_string(hidden));
}

// [a | b] along the feature axis.
Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const std::size_t batch = a.dim(0), na = a.dim(1), nb = b.dim(1);
  Tensor out({batch, na + nb});
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < na; ++j) out.at(r, j) = a.at(r, j);
    for (std::size_t j = 0; j < nb; ++j) out.at(r, na + j) = b.at(r, j);
  }
  return out;
}

} // namespace

CellState lstm_step(const Tensor& x, const CellState& state, const LstmParams& p,
                    LstmStepCache* cache) {
  const std::size_t hidden = p.hidden();
  check_step_shapes(x, state, p.input(), hidden, "lstm_step");
  if (!state.c.same_shape(state.h))
    throw DimensionError("lstm_step: cell state c " + state.c.shape_str() +
                         " does not match h " + state.h.shape_str());
  const std::size_t batch = x.dim(0);

  Tensor a_f = ew(EwOp::Add, linear(state.h, p.W_fh.value, p.b_f.value),
                  linear(x, p.W_fx.value, Tensor({hidden})));
  Tensor a_i = ew(EwOp::Add, linear(state.h, p.W_ih.value, p.b_i.value),
                  linear(x, p.W_ix.value, Tensor({hidden})));
  Tensor a_g = ew(EwOp::Add, linear(state.h, p.W_ch.value, p.b_c.value),
                  linear(x, p.W_cx.value, Tensor({hidden})));
  Tensor a_o = ew(EwOp::Add, linear(state.h, p.W_oh.value, p.b_o.value),
                  linear(x, p.W_ox.value, Tensor({hidden})));

  Tensor f = a_f, i = a_i, g = a_g, o = a_o;
  for (double& v : f.vec()) v = act::sigmoid(v);
  for (double& v : i.vec()) v = act::sigmoid(v);
  for (double& v : g.vec()) v = std::tanh(v);
  for (double& v : o.vec()) v = act::sigmoid(v);

  Tensor c({batch, hidden});
  for (std::size_t n = 0; n < c.size(); ++n)
    c[n] = f[n] * state.c[n] + i[n] * g[n];
  Tensor tanh_c = c;
  for (double& v : tanh_c.vec()) v = std::tanh(v);
  Tensor h({batch, hidden});
  for (std::size_t n = 0; n < h.size(); ++n) h[n] = o[n] * tanh_c[n];

  if (cache) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->f = std::move(f);
    cache->i = std::move(i);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c = c;
    cache->tanh_c = std::move(tanh_c);
    cache->valid = true;
  }
  return CellState{std::move(h), std::move(c)};
}

void lstm_step_backward(const LstmStepCache& cache, LstmParams& p,
                        const Tensor& grad_h, const Tensor& grad_c,
                        Tensor& dx, Tensor& dh_prev, Tensor& dc_prev) {
  if (!cache.valid) throw UsageError("lstm_step_backward: no forward cache");
  const std::size_t n = cache.f.size();

  Tensor da_f = cache.f, da_i = cache.i, da_g = cache.g, da_o = cache.o;
  dc_prev = Tensor(cache.c_prev.shape());
  for (std::size_t k = 0; k < n; ++k) {
    const double tc = cache.tanh_c[k];
    const double d_o = grad_h[k] * tc;
    const double dc = grad_c[k] + grad_h[k] * cache.o[k] * (1.0 - tc * tc);
    const double f = cache.f[k], i = cache.i[k], g = cache.g[k], o = cache.o[k];
    da_f[k] = dc * cache.c_prev[k] * f * (1.0 - f);
    da_i[k] = dc * g * i * (1.0 - i);
    da_g[k] = dc * i * (1.0 - g * g);
    da_o[k] = d_o * o * (1.0 - o);
    dc_prev[k] = dc * f;
  }

  dx = Tensor(cache.x.shape());
  dh_prev = Tensor(cache.h_prev.shape());
  linear_backward(cache.h_prev, p.W_fh.value, da_f, dh_prev, p.W_fh.grad, p.b_f.grad);
  linear_backward(cache.h_prev, p.W_ih.value, da_i, dh_prev, p.W_ih.grad, p.b_i.grad);
  linear_backward(cache.h_prev, p.W_ch.value, da_g, dh_prev, p.W_ch.grad, p.b_c.grad);
  linear_backward(cache.h_prev, p.W_oh.value, da_o, dh_prev, p.W_oh.grad, p.b_o.grad);
  Tensor bias_sink_f({p.hidden()}), bias_sink_i({p.hidden()}), bias_sink_g({p.hidden()}),
      bias_sink_o({p.hidden()});
  linear_backward(cache.x, p.W_fx.value, da_f, dx, p.W_fx.grad, bias_sink_f);
  linear_backward(cache.x, p.W_ix.value, da_i, dx, p.W_ix.grad, bias_sink_i);
  linear_backward(cache.x, p.W_cx.value, da_g, dx, p.W_cx.grad, bias_sink_g);
  linear_backward(cache.x, p.W_ox.value, da_o, dx, p.W_ox.grad, bias_sink_o);
}

CellState gru_step(const Tensor& x, const CellState& state, const GruParams& p,
                   GruStepCache* cache) {
  const std::size_t hidden = p.hidden();
  check_step_shapes(x, state, p.input(), hidden, "gru_step");
  const std::size_t batch = x.dim(0);

  Tensor z_in = concat_cols(state.h, x);
  Tensor r = linear(z_in, p.W_r.value, p.b_r.value);
  Tensor zg = linear(z_in, p.W_z.value, p.b_z.value);
  for (double& v : r.vec()) v = act::sigmoid(v);
  for (double& v : zg.vec()) v = act::sigmoid(v);

  Tensor rh = ew(EwOp::Mul, r, state.h);
  Tensor zr_in = concat_cols(rh, x);
  Tensor hcand = linear(zr_in, p.W_h.value, p.b_h.value);
  for (double& v : hcand.vec()) v = std::tanh(v);

  Tensor h({batch, hidden});
  for (std::size_t n = 0; n < h.size(); ++n)
    h[n] = (1.0 - zg[n]) * state.h[n] + zg[n] * hcand[n];

  if (cache) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->z_in = std::move(z_in);
    cache->zr_in = std::move(zr_in);
    cache->r = std::move(r);
    cache->zg = std::move(zg);
    cache->hcand = std::move(hcand);
    cache->valid = true;
  }
  return CellState{std::move(h), Tensor{}};
}

void gru_step_backward(const GruStepCache& cache, GruParams& p,
                       const Tensor& grad_h, Tensor& dx, Tensor& dh_prev) {
  if (!cache.valid) throw UsageError("gru_step_backward: no forward cache");
  const std::size_t hidden = p.hidden();
  const std::size_t input = p.input();
  const std::size_t batch = cache.x.dim(0);
  const std::size_t n = cache.r.size();

  Tensor da_h = cache.hcand, da_z = cache.zg;
  dh_prev = Tensor(cache.h_prev.shape());
  for (std::size_t k = 0; k < n; ++k) {
    const double z = cache.zg[k], hc = cache.hcand[k];
    const double dhc = grad_h[k] * z;
    da_h[k] = dhc * (1.0 - hc * hc);
    da_z[k] = grad_h[k] * (hc - cache.h_prev[k]) * z * (1.0 - z);
    dh_prev[k] = grad_h[k] * (1.0 - z);
  }

  // Through the candidate: d[r*h_prev | x] = da_h . W_h
  Tensor dzr(cache.zr_in.shape());
  linear_backward(cache.zr_in, p.W_h.value, da_h, dzr, p.W_h.grad, p.b_h.grad);

  dx = Tensor(cache.x.shape());
  Tensor da_r({batch, hidden});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) {
      const double drh = dzr.at(b, j);
      const double r = cache.r.at(b, j);
      da_r.at(b, j) = drh * cache.h_prev.at(b, j) * r * (1.0 - r);
      dh_prev.at(b, j) += drh * r;
    }
    for (std::size_t j = 0; j < input; ++j) dx.at(b, j) += dzr.at(b, hidden + j);
  }

  Tensor dz_in(cache.z_in.shape());
  linear_backward(cache.z_in, p.W_r.value, da_r, dz_in, p.W_r.grad, p.b_r.grad);
  linear_backward(cache.z_in, p.W_z.value, da_z, dz_in, p.W_z.grad, p.b_z.grad);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) dh_prev.at(b, j) += dz_in.at(b, j);
    for (std::size_t j = 0; j < input; ++j) dx.at(b, j) += dz_in.at(b, hidden + j);
  }
}

} // namespace ventseq
