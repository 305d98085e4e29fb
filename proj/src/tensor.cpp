#include "ventseq/tensor.hpp"

#include <numeric>
#include <sstream>

namespace ventseq {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void validate_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 3)
    throw DimensionError("tensor rank must be 1..3, got " + std::to_string(shape.size()));
  for (std::size_t d : shape)
    if (d == 0) throw DimensionError("tensor shape entries must be >= 1");
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_product(shape_) != data_.size())
    throw DimensionError("shape " + shape_str() + " does not match data length " +
                         std::to_string(data_.size()));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(shape_.size()));
  return shape_[axis];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul needs rank-2 operands, got " + a.shape_str() + " and " +
                         b.shape_str());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul inner dimensions differ: " + a.shape_str() + " vs " +
                         b.shape_str());
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  // ikj order: per output element the k-sum still runs ascending.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Tensor ew(EwOp op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("elementwise op on mismatched shapes " + a.shape_str() + " vs " +
                         b.shape_str());
  Tensor out = a;
  double* po = out.data();
  const double* pb = b.data();
  switch (op) {
    case EwOp::Add:
      for (std::size_t i = 0; i < out.size(); ++i) po[i] += pb[i];
      break;
    case EwOp::Sub:
      for (std::size_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
      break;
    case EwOp::Mul:
      for (std::size_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
      break;
  }
  return out;
}

Tensor reduce(ReduceOp op, const Tensor& t, std::size_t axis) {
  if (axis >= t.rank())
    throw DimensionError("reduce axis " + std::to_string(axis) + " out of range for " +
                         t.shape_str());
  // Split indices into (outer, axis, inner) with the reduced axis in the middle.
  std::size_t outer = 1, inner = 1;
  const auto& shape = t.shape();
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];

  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor out(out_shape);
  const double* pt = t.data();
  double* po = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t in = 0; in < inner; ++in)
        po[o * inner + in] += pt[(o * n + a) * inner + in];
  if (op == ReduceOp::Mean)
    for (std::size_t i = 0; i < out.size(); ++i) po[i] /= static_cast<double>(n);
  return out;
}

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& bias) {
  if (x.rank() != 2 || W.rank() != 2)
    throw DimensionError("linear needs rank-2 x and W, got " + x.shape_str() + " and " +
                         W.shape_str());
  const std::size_t batch = x.dim(0), in = x.dim(1), out = W.dim(0);
  if (W.dim(1) != in)
    throw DimensionError("linear: x " + x.shape_str() + " incompatible with W " + W.shape_str());
  if (bias.size() != out)
    throw DimensionError("linear: bias length " + std::to_string(bias.size()) +
                         " != out width " + std::to_string(out));
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = x.data() + b * in;
    double* yr = y.data() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = W.data() + o * in;
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      yr[o] = acc + bias[o];
    }
  }
  return y;
}

void linear_backward(const Tensor& x, const Tensor& W, const Tensor& dy,
                     Tensor& dx, Tensor& dW, Tensor& db) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = W.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != out)
    throw DimensionError("linear_backward: dy shape " + dy.shape_str() + " unexpected");
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = x.data() + b * in;
    const double* dyr = dy.data() + b * out;
    double* dxr = dx.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      const double* wr = W.data() + o * in;
      double* dwr = dW.data() + o * in;
      for (std::size_t k = 0; k < in; ++k) {
        dxr[k] += g * wr[k];
        dwr[k] += g * xr[k];
      }
      db[o] += g;
    }
  }
}

} // namespace ventseq
