#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ventseq/errors.hpp"

namespace ventseq {

// Dense row-major array of f64, rank 1..3. Immutable by convention once
// built: operations return new tensors instead of mutating inputs. The
// mutable accessors exist for construction and in-place parameter updates.
class Tensor {
public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

enum class EwOp { Add, Sub, Mul };
enum class ReduceOp { Sum, Mean };

// Standard matrix product of rank-2 tensors, fixed ascending summation order.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise op on identically shaped tensors.
Tensor ew(EwOp op, const Tensor& a, const Tensor& b);

// Reduce one axis away; rank-1 input with axis 0 yields a scalar-like [1] tensor.
Tensor reduce(ReduceOp op, const Tensor& t, std::size_t axis);

// y[b, o] = sum_k x[b, k] * W[o, k] + bias[o].  W is [out, in], bias [out].
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& bias);

// Accumulates gradients of `linear`: dx += dy . W ; dW += dy^T . x ; db += sum_b dy.
void linear_backward(const Tensor& x, const Tensor& W, const Tensor& dy,
                     Tensor& dx, Tensor& dW, Tensor& db);

} // namespace ventseq
