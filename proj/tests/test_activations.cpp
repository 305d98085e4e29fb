#include <doctest.h>

#include <cmath>

#include "ventseq/activations.hpp"
#include "ventseq/cells.hpp"

using namespace ventseq;

TEST_CASE("sigmoid values and identities") {
  CHECK(act::sigmoid(0.0) == 0.5);
  CHECK(act::sigmoid(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  for (double x : {-3.0, -0.7, 0.1, 2.5, 10.0})
    CHECK(std::fabs(act::sigmoid(x) + act::sigmoid(-x) - 1.0) <= 1e-15);
  // saturation without overflow
  CHECK(act::sigmoid(1000.0) == 1.0);
  CHECK(act::sigmoid(-1000.0) == 0.0);
}

TEST_CASE("tanh values") {
  CHECK(act::tanh_act(0.0) == 0.0);
  CHECK(act::tanh_act(0.5) == doctest::Approx(0.46211715726000974).epsilon(1e-15));
  for (double x : {-2.0, -0.3, 0.7, 4.0})
    CHECK(act::tanh_act(-x) == doctest::Approx(-act::tanh_act(x)).epsilon(1e-15));
}

TEST_CASE("selu values") {
  CHECK(act::selu(0.0) == 0.0);
  CHECK(act::selu(1.0) == doctest::Approx(1.0507009873554805).epsilon(1e-15));
  CHECK(act::selu(-1.0) == doctest::Approx(-1.1113307378125627).epsilon(1e-15));
}

TEST_CASE("selu continuity at 0") {
  const double eps = 1e-9;
  CHECK(std::fabs(act::selu(-eps) - act::selu(eps)) <= 1e-8);
}

TEST_CASE("derivative closed forms") {
  CHECK(act::sigmoid_deriv(0.0) == 0.25);
  CHECK(act::tanh_deriv(0.0) == 1.0);
  CHECK(act::selu_deriv(0.0) == act::kSeluLambda);
}

TEST_CASE("selu derivative vs central differences at pinned points") {
  const double h = 1e-6;
  for (double x : {-2.0, -0.5, 0.3, 2.0}) {
    const double numeric = (act::selu(x + h) - act::selu(x - h)) / (2.0 * h);
    CHECK(std::fabs(numeric - act::selu_deriv(x)) <= 1e-8);
  }
}

TEST_CASE("all derivatives match finite differences on a seeded grid") {
  Rng rng(55);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    double x = rng.uniform(-5.0, 5.0);
    if (x == 0.0) x = 0.5;
    struct Case {
      double (*f)(double);
      double (*df)(double);
    };
    const Case cases[] = {{act::sigmoid, act::sigmoid_deriv},
                          {act::tanh_act, act::tanh_deriv},
                          {act::selu, act::selu_deriv}};
    for (const Case& c : cases) {
      const double numeric = (c.f(x + h) - c.f(x - h)) / (2.0 * h);
      const double analytic = c.df(x);
      const double rel = std::fabs(numeric - analytic) / std::max(1e-10, std::fabs(analytic));
      REQUIRE(rel <= 1e-6);
    }
  }
}
