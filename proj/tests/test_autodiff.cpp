#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gmcf/autodiff.hpp"
#include "gmcf/errors.hpp"
#include "gmcf/random.hpp"

namespace gmcf {
namespace {

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

Parameter random_param(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Parameter(rows, cols, v);
}

TEST(Autodiff, ElementwiseProduct) {
  Tape t;
  auto a = t.constant({1, 2});
  auto b = t.constant({3, 4});
  EXPECT_EQ(as_vector(t.mul(a, b).value()), (std::vector<double>{3, 8}));
}

TEST(Autodiff, SigmoidAtZero) {
  Tape t;
  EXPECT_EQ(t.sigmoid(t.constant({0.0})).scalar(), 0.5);
}

TEST(Autodiff, DotOfOrthogonalVectors) {
  Tape t;
  EXPECT_EQ(t.dot(t.constant({1, 0}), t.constant({0, 1})).scalar(), 0.0);
}

TEST(Autodiff, ShapeMismatchNamesPrimitive) {
  Tape t;
  auto a = t.constant({1, 2});
  auto b = t.constant({1, 2, 3});
  try {
    t.add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
  }
  EXPECT_THROW(t.mul(a, b), ShapeError);
  EXPECT_THROW(t.dot(a, b), ShapeError);
}

TEST(Autodiff, DotSelfGradient) {
  Parameter p(2, 1, {1, 2});
  Tape t;
  auto v = t.param(p);
  t.backward(t.dot(v, v));
  EXPECT_EQ(as_vector(p.grad()), (std::vector<double>{2, 4}));
}

TEST(Autodiff, SigmoidGradientAtZero) {
  Parameter w(1, 1, {0.0});
  Tape t;
  t.backward(t.sigmoid(t.param(w)));
  EXPECT_EQ(w.grad()[0], 0.25);
}

TEST(Autodiff, BackwardRejectsNonScalar) {
  Parameter p(2, 1, {1, 2});
  Tape t;
  EXPECT_THROW(t.backward(t.param(p)), ContractError);
}

TEST(Autodiff, RepeatedBackwardAccumulates) {
  Parameter p(1, 1, {3.0});
  for (int k = 0; k < 2; ++k) {
    Tape t;
    auto v = t.param(p);
    t.backward(t.scale(v, 2.0));
  }
  EXPECT_EQ(p.grad()[0], 4.0);
  p.zero_grad();
  EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(Autodiff, ParamLeafIsShared) {
  Parameter p(1, 1, {3.0});
  Tape t;
  EXPECT_EQ(t.param(p).index(), t.param(p).index());
}

TEST(Autodiff, ReluKinkHasZeroDerivative) {
  Parameter p(3, 1, {-1.0, 0.0, 2.0});
  Tape t;
  t.backward(t.sum(t.relu(t.param(p))));
  EXPECT_EQ(as_vector(p.grad()), (std::vector<double>{0, 0, 1}));
}

TEST(Autodiff, MatVecWithColumnOffset) {
  // m = [[1 2 3], [4 5 6]]; columns 1..2 times [1, -1]
  Parameter m(2, 3, {1, 2, 3, 4, 5, 6});
  Tape t;
  auto y = t.matvec(t.param(m), t.constant({1, -1}), 1);
  EXPECT_EQ(as_vector(y.value()), (std::vector<double>{-1, -1}));
  t.backward(t.sum(y));
  EXPECT_EQ(as_vector(m.grad()), (std::vector<double>{0, 1, -1, 0, 1, -1}));
}

TEST(Autodiff, BceWithLogitMatchesDirectFormula) {
  for (double x : {-30.0, -2.5, 0.0, 0.7, 40.0}) {
    for (double y : {0.0, 1.0}) {
      Tape t;
      const double got = t.bce_with_logit(t.constant({x}), y).scalar();
      const double p = 1.0 / (1.0 + std::exp(-x));
      const double direct = -(y * std::log(p) + (1 - y) * std::log(1 - p));
      if (std::isfinite(direct) && direct > 1e-10) {
        EXPECT_NEAR(got, direct, 1e-9 * std::max(1.0, direct)) << x << " " << y;
      }
      EXPECT_GE(got, 0.0);
      EXPECT_TRUE(std::isfinite(got));
    }
  }
}

TEST(Autodiff, ReplayIsBitIdentical) {
  Rng rng(4);
  Parameter w = random_param(3, 4, rng);
  Parameter x = random_param(4, 1, rng);
  auto run = [&] {
    Tape t;
    return t.sum(t.tanh(t.matvec(t.param(w), t.param(x)))).scalar();
  };
  EXPECT_EQ(run(), run());
}

TEST(Autodiff, GradientOfSumIsSumOfGradients) {
  Rng rng(9);
  Parameter w = random_param(3, 1, rng);
  auto f = [](Tape& t, Var v) { return t.sum(t.sigmoid(v)); };
  auto g = [](Tape& t, Var v) { return t.dot(v, t.tanh(v)); };
  {
    Tape t;
    auto v = t.param(w);
    t.backward(t.add(f(t, v), g(t, v)));
  }
  const auto joint = as_vector(w.grad());
  w.zero_grad();
  {
    Tape t;
    t.backward(f(t, t.param(w)));
  }
  {
    Tape t;
    t.backward(g(t, t.param(w)));
  }
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(joint[k], w.grad()[k], 1e-15);
}

// Every primitive against central differences on random inputs away from the
// relu kink.
TEST(Autodiff, PrimitivesMatchFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Parameter a = random_param(4, 1, rng);
    Parameter b = random_param(4, 1, rng);
    Parameter m = random_param(3, 6, rng);
    for (double& v : a.values()) v += v >= 0 ? 0.1 : -0.1;
    std::vector<Parameter*> params{&a, &b, &m};
    auto f = [&](Tape& t) {
      Var va = t.param(a), vb = t.param(b), vm = t.param(m);
      Var prod = t.mul(va, vb);
      Var diff = t.sub(t.scale(va, 1.5), vb);
      Var cat = t.concat({t.relu(va), t.tanh(diff)});
      Var mv = t.sigmoid(t.matvec(vm, t.add(prod, vb), 2));
      Var head = t.add(t.sum(t.mul(mv, mv)), t.dot(cat, cat));
      return t.add(head, t.bce_with_logit(t.sum(prod), 1.0));
    };
    const auto r = gradient_check(f, params, 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-6) << "trial " << trial;
    EXPECT_EQ(r.entries_checked, 4u + 4u + 18u);
  }
}

TEST(Autodiff, RandomThreeLayerComposition) {
  Rng rng(5);
  Parameter w1 = random_param(6, 4, rng), w2 = random_param(5, 6, rng), w3 = random_param(1, 5, rng);
  Parameter x = random_param(4, 1, rng);
  std::vector<Parameter*> params{&w1, &w2, &w3, &x};
  auto f = [&](Tape& t) {
    Var h1 = t.tanh(t.matvec(t.param(w1), t.param(x)));
    Var h2 = t.sigmoid(t.matvec(t.param(w2), h1));
    return t.sum(t.matvec(t.param(w3), h2));
  };
  EXPECT_LT(gradient_check(f, params, 1e-5).max_relative_error, 1e-6);
}

TEST(Autodiff, GradientCheckConstantForward) {
  Parameter p(2, 1, {1, 2});
  std::vector<Parameter*> params{&p};
  const auto r = gradient_check([](Tape& t) { return t.constant({3.0}); }, params, 1e-5);
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(Autodiff, GradientCheckLinearForward) {
  Parameter p(3, 1, {1, -2, 5});
  std::vector<Parameter*> params{&p};
  const auto r = gradient_check([&](Tape& t) { return t.sum(t.param(p)); }, params, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-9);
  for (double g : p.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, GradientCheckErrors) {
  Parameter p(1, 1, {1.0});
  std::vector<Parameter*> params{&p};
  EXPECT_THROW(gradient_check([&](Tape& t) { return t.sum(t.param(p)); }, params, 0.0), ConfigError);
  EXPECT_THROW(gradient_check([](Tape& t) { return t.constant({NAN}); }, params, 1e-5), NumericError);
}

TEST(Autodiff, ParameterShapeChecked) { EXPECT_THROW(Parameter(2, 2, {1, 2, 3}), ShapeError); }

}  // namespace
}  // namespace gmcf
