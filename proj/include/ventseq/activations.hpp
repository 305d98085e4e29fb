#pragma once

#include <cmath>

namespace ventseq::act {

// Fixed SELU constants, never configurable.
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;

inline double sigmoid(double x) {
  // Branch on sign so exp never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double tanh_act(double x) { return std::tanh(x); }

inline double selu(double x) {
  if (x > 0.0) return kSeluLambda * x;
  return kSeluLambda * (kSeluAlpha * std::exp(x) - kSeluAlpha);
}

inline double sigmoid_deriv(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

inline double tanh_deriv(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

// At 0 the right-limit lambda is used as the subgradient.
inline double selu_deriv(double x) {
  if (x >= 0.0) return kSeluLambda;
  return kSeluLambda * kSeluAlpha * std::exp(x);
}

} // namespace ventseq::act
