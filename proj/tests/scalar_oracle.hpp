#pragma once

// Independent scalar-loop reimplementation of the recurrent cells. Kept
// deliberately naive (per-element loops, no shared helpers) so it cannot
// inherit a bug from the library path it checks.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ventseq/cells.hpp"

namespace oracle {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CellOut {
  std::vector<std::vector<double>> h, c;
};

inline CellOut lstm_step_scalar(const ventseq::Tensor& x, const ventseq::Tensor& h_prev,
                                const ventseq::Tensor& c_prev, const ventseq::LstmParams& p) {
  const std::size_t batch = x.dim(0), input = x.dim(1), hidden = h_prev.dim(1);
  CellOut out;
  out.h.assign(batch, std::vector<double>(hidden));
  out.c.assign(batch, std::vector<double>(hidden));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) {
      double af = p.b_f.value[j], ai = p.b_i.value[j], ag = p.b_c.value[j], ao = p.b_o.value[j];
      for (std::size_t k = 0; k < hidden; ++k) {
        const double h = h_prev.at(b, k);
        af += p.W_fh.value.at(j, k) * h;
        ai += p.W_ih.value.at(j, k) * h;
        ag += p.W_ch.value.at(j, k) * h;
        ao += p.W_oh.value.at(j, k) * h;
      }
      for (std::size_t k = 0; k < input; ++k) {
        const double xv = x.at(b, k);
        af += p.W_fx.value.at(j, k) * xv;
        ai += p.W_ix.value.at(j, k) * xv;
        ag += p.W_cx.value.at(j, k) * xv;
        ao += p.W_ox.value.at(j, k) * xv;
      }
      const double f = sig(af), i = sig(ai), g = std::tanh(ag), o = sig(ao);
      const double c = f * c_prev.at(b, j) + i * g;
      out.c[b][j] = c;
      out.h[b][j] = o * std::tanh(c);
    }
  }
  return out;
}

inline CellOut gru_step_scalar(const ventseq::Tensor& x, const ventseq::Tensor& h_prev,
                               const ventseq::GruParams& p) {
  const std::size_t batch = x.dim(0), input = x.dim(1), hidden = h_prev.dim(1);
  CellOut out;
  out.h.assign(batch, std::vector<double>(hidden));
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<double> r(hidden), z(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
      double ar = p.b_r.value[j], az = p.b_z.value[j];
      for (std::size_t k = 0; k < hidden; ++k) {
        ar += p.W_r.value.at(j, k) * h_prev.at(b, k);
        az += p.W_z.value.at(j, k) * h_prev.at(b, k);
      }
      for (std::size_t k = 0; k < input; ++k) {
        ar += p.W_r.value.at(j, hidden + k) * x.at(b, k);
        az += p.W_z.value.at(j, hidden + k) * x.at(b, k);
      }
      r[j] = sig(ar);
      z[j] = sig(az);
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      double ah = p.b_h.value[j];
      for (std::size_t k = 0; k < hidden; ++k)
        ah += p.W_h.value.at(j, k) * (r[k] * h_prev.at(b, k));
      for (std::size_t k = 0; k < input; ++k)
        ah += p.W_h.value.at(j, hidden + k) * x.at(b, k);
      const double cand = std::tanh(ah);
      out.h[b][j] = (1.0 - z[j]) * h_prev.at(b, j) + z[j] * cand;
    }
  }
  return out;
}

} // namespace oracle
