#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ventseq/tensor.hpp"

namespace ventseq {

struct GradCheckResult {
  std::string component;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  bool pass() const { return max_rel_err <= threshold; }
};

// Central finite differences over every element of `tensors`, compared
// against the matching `analytic` gradients. `loss` re-evaluates the scalar
// objective at the current tensor values.
double fd_max_rel_err(const std::vector<Tensor*>& tensors,
                      const std::vector<const Tensor*>& analytic,
                      const std::function<double()>& loss, double h = 1e-6);

// One entry per component: LSTM step, GRU step, both bidirectional kinds,
// multiply, batchnorm, dense, losses, and the full graph at desk width.
// fault_inject corrupts one analytic gradient so the suite must fail.
std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, bool fault_inject = false);

} // namespace ventseq
