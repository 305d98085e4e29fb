#include <doctest.h>

#include <cmath>

#include "ventseq/gradcheck.hpp"
#include "ventseq/layers.hpp"

using namespace ventseq;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.vec()) v = rng.uniform(-scale, scale);
  return t;
}

Tensor reverse_time(const Tensor& seq) {
  const std::size_t B = seq.dim(0), T = seq.dim(1), F = seq.dim(2);
  Tensor out({B, T, F});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) out.at(b, t, f) = seq.at(b, T - 1 - t, f);
  return out;
}

Tensor swap_halves(const Tensor& seq) {
  const std::size_t B = seq.dim(0), T = seq.dim(1), F = seq.dim(2), H = F / 2;
  Tensor out({B, T, F});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < H; ++j) {
        out.at(b, t, j) = seq.at(b, t, H + j);
        out.at(b, t, H + j) = seq.at(b, t, j);
      }
  return out;
}

// copy of `src` with the forward/backward direction parameters exchanged
BiRnnLayer direction_swapped(BiRnnLayer& src) {
  BiRnnLayer out(src.kind(), "swapped", src.input_size(), src.hidden());
  std::vector<Param*> sp, op;
  src.collect_params(sp);
  out.collect_params(op);
  const std::size_t half = sp.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    op[i]->value = sp[half + i]->value;
    op[half + i]->value = sp[i]->value;
  }
  return out;
}

} // namespace

TEST_CASE("bidirectional output width is 2x hidden") {
  Rng rng(5);
  for (LayerKind kind : {LayerKind::BiLstm, LayerKind::BiGru}) {
    BiRnnLayer layer(kind, "bi", 3, 4);
    layer.init(rng);
    Tensor out = layer.forward(random_tensor(rng, {2, 6, 3}), false);
    CHECK(out.shape() == std::vector<std::size_t>{2, 6, 8});
  }
}

TEST_CASE("bidirectional with zero params is zero") {
  BiRnnLayer layer(LayerKind::BiLstm, "bi", 3, 4);
  Rng rng(6);
  Tensor out = layer.forward(random_tensor(rng, {2, 5, 3}), false);
  for (double v : out.vec()) CHECK(v == 0.0);
}

TEST_CASE("T=1 equals one step per direction") {
  Rng rng(8);
  BiRnnLayer layer(LayerKind::BiGru, "bi", 3, 4);
  layer.init(rng);
  Tensor seq = random_tensor(rng, {2, 1, 3});
  Tensor out = layer.forward(seq, false);

  std::vector<Param*> ps;
  layer.collect_params(ps);
  // rebuild the two GRU cells from the layer's own parameters
  GruParams fwd("f", 3, 4), bwd("b", 3, 4);
  std::vector<Param*> fp, bp;
  fwd.collect(fp);
  bwd.collect(bp);
  for (std::size_t i = 0; i < fp.size(); ++i) {
    fp[i]->value = ps[i]->value;
    bp[i]->value = ps[fp.size() + i]->value;
  }
  Tensor x({2, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t f = 0; f < 3; ++f) x.at(b, f) = seq.at(b, 0, f);
  CellState zero{Tensor({2, 4}), Tensor{}};
  CellState hf = gru_step(x, zero, fwd);
  CellState hb = gru_step(x, zero, bwd);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(out.at(b, 0, j) == hf.h.at(b, j));
      CHECK(out.at(b, 0, 4 + j) == hb.h.at(b, j));
    }
}

TEST_CASE("reversing input swaps and reverses the output halves") {
  Rng rng(11);
  for (LayerKind kind : {LayerKind::BiLstm, LayerKind::BiGru}) {
    BiRnnLayer layer(kind, "bi", 3, 4);
    layer.init(rng);
    BiRnnLayer swapped = direction_swapped(layer);
    Tensor seq = random_tensor(rng, {2, 5, 3});

    Tensor lhs = layer.forward(reverse_time(seq), false);
    Tensor rhs = reverse_time(swap_halves(swapped.forward(seq, false)));
    for (std::size_t i = 0; i < lhs.size(); ++i)
      REQUIRE(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-14));
  }
}

TEST_CASE("bidirectional backward shape and zero-grad case") {
  Rng rng(12);
  BiRnnLayer layer(LayerKind::BiLstm, "bi", 3, 2);
  layer.init(rng);
  Tensor seq = random_tensor(rng, {2, 4, 3});
  layer.forward(seq, true);
  Tensor dseq = layer.backward(Tensor({2, 4, 4}));
  CHECK(dseq.shape() == seq.shape());
  for (double v : dseq.vec()) CHECK(v == 0.0);

  CHECK_THROWS_AS(layer.backward(Tensor({2, 4, 4})), UsageError); // cache consumed
}

TEST_CASE("multiply layer") {
  Rng rng(13);
  Tensor x = random_tensor(rng, {2, 3, 4});
  MultiplyLayer layer;
  Tensor with_ones = layer.forward(x, Tensor::full({2, 3, 4}, 1.0), false);
  CHECK(with_ones.vec() == x.vec());
  Tensor with_zeros = layer.forward(x, Tensor({2, 3, 4}), false);
  for (double v : with_zeros.vec()) CHECK(v == 0.0);

  Tensor y = random_tensor(rng, {2, 3, 4});
  CHECK(layer.forward(x, y, false).vec() == layer.forward(y, x, false).vec());
  CHECK_THROWS_AS(layer.forward(x, Tensor({2, 3, 5}), false), DimensionError);
}

TEST_CASE("batchnorm train mode on constant input is zero") {
  BatchNormLayer bn("bn", 3);
  Tensor x = Tensor::full({4, 2, 3}, 7.5);
  Tensor out = bn.forward(x, true);
  for (double v : out.vec()) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("batchnorm preserves already-normalized input up to epsilon") {
  Rng rng(14);
  const std::size_t N = 64, F = 3;
  Tensor x({N, F});
  for (double& v : x.vec()) v = rng.normal(0.0, 1.0);
  // exactly normalize per feature first
  for (std::size_t f = 0; f < F; ++f) {
    double mean = 0.0;
    for (std::size_t n = 0; n < N; ++n) mean += x.at(n, f);
    mean /= N;
    double var = 0.0;
    for (std::size_t n = 0; n < N; ++n) var += (x.at(n, f) - mean) * (x.at(n, f) - mean);
    var /= N;
    for (std::size_t n = 0; n < N; ++n) x.at(n, f) = (x.at(n, f) - mean) / std::sqrt(var);
  }
  BatchNormLayer bn("bn", F);
  Tensor out = bn.forward(x, true);
  // the epsilon inside the inv-std denominator shifts values by ~|x|*eps/2
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::fabs(out[i] - x[i]) <= 1e-4);
}

TEST_CASE("batchnorm running stats follow the momentum recurrence") {
  Rng rng(15);
  BatchNormLayer bn("bn", 2);
  bn.momentum = 0.9;
  Tensor x = random_tensor(rng, {6, 2}, 2.0);
  Tensor old_mean = bn.running_mean();
  Tensor old_var = bn.running_var();
  bn.forward(x, true);
  for (std::size_t f = 0; f < 2; ++f) {
    double mean = 0.0;
    for (std::size_t n = 0; n < 6; ++n) mean += x.at(n, f);
    mean /= 6.0;
    double var = 0.0;
    for (std::size_t n = 0; n < 6; ++n) var += (x.at(n, f) - mean) * (x.at(n, f) - mean);
    var /= 6.0;
    CHECK(bn.running_mean()[f] ==
          doctest::Approx(0.9 * old_mean[f] + 0.1 * mean).epsilon(1e-12));
    CHECK(bn.running_var()[f] == doctest::Approx(0.9 * old_var[f] + 0.1 * var).epsilon(1e-12));
  }
}

TEST_CASE("batchnorm train output is normalized per feature") {
  Rng rng(16);
  BatchNormLayer bn("bn", 4);
  Tensor x = random_tensor(rng, {3, 7, 4}, 5.0);
  Tensor out = bn.forward(x, true);
  const std::size_t N = 21;
  for (std::size_t f = 0; f < 4; ++f) {
    double mean = 0.0, var = 0.0;
    for (std::size_t n = 0; n < N; ++n) mean += out[n * 4 + f];
    mean /= N;
    for (std::size_t n = 0; n < N; ++n) var += (out[n * 4 + f] - mean) * (out[n * 4 + f] - mean);
    var /= N;
    CHECK(std::fabs(mean) <= 1e-10);
    CHECK(std::fabs(var - 1.0) <= 1e-3); // up to the epsilon in the denominator
  }
}

TEST_CASE("batchnorm edge cases") {
  BatchNormLayer bn("bn", 3);
  CHECK_THROWS_AS(bn.forward(Tensor({1, 3}), true), UsageError); // variance undefined
  CHECK_THROWS_AS(bn.backward(Tensor({4, 3})), UsageError);      // no train cache

  // infer mode needs no cache and works on a single row
  Tensor out = bn.forward(Tensor({1, 3}), false);
  CHECK(out.size() == 3);
}

TEST_CASE("batchnorm grad_beta sums the upstream gradient") {
  Rng rng(17);
  BatchNormLayer bn("bn", 2);
  Tensor x = random_tensor(rng, {5, 2}, 2.0);
  bn.forward(x, true);
  Tensor dy = random_tensor(rng, {5, 2});
  Tensor dgamma, dbeta;
  bn.backward(dy, dgamma, dbeta);
  for (std::size_t f = 0; f < 2; ++f) {
    double sum = 0.0;
    for (std::size_t n = 0; n < 5; ++n) sum += dy.at(n, f);
    CHECK(dbeta[f] == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("dense layer identity and zero cases") {
  DenseLayer id("d", 3, 3, DenseAct::Linear);
  for (std::size_t i = 0; i < 3; ++i) id.weight().value.at(i, i) = 1.0;
  Rng rng(18);
  Tensor x = random_tensor(rng, {2, 4, 3});
  CHECK(id.forward(x, false).vec() == x.vec());

  DenseLayer zero("z", 3, 2, DenseAct::Selu);
  Tensor out = zero.forward(x, false);
  for (double v : out.vec()) CHECK(v == 0.0);

  CHECK_THROWS_AS(id.forward(Tensor({2, 4, 5}), false), DimensionError);
  CHECK_THROWS_AS(id.backward(Tensor({2, 4, 3})), UsageError);
}

TEST_CASE("per-layer gradients agree with finite differences") {
  // full component sweep, thresholds 1e-5 per layer and 1e-4 for the graph
  for (const GradCheckResult& r : run_gradcheck(2024)) {
    INFO(r.component, " max rel err ", r.max_rel_err);
    CHECK(r.pass());
  }
}
