// Copyright 2026 The sslcalib Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sslcalib/rng.hpp"
#include "sslcalib/tensor.hpp"

namespace sslcalib {
namespace {

using ::testing::DoubleNear;
using ::testing::ElementsAre;
using ::testing::HasSubstr;

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, bool grad = true, double lo = -1.0,
                     double hi = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor::matrix(r, c, std::move(v), grad);
}

TEST(TensorTest, SoftmaxOfEqualLogitsIsUniform) {
  const Tensor p = softmax(Tensor::matrix(1, 4, {0, 0, 0, 0}));
  EXPECT_THAT(testing::values(p.data()), ElementsAre(0.25, 0.25, 0.25, 0.25));
}

TEST(TensorTest, ReluClampsNegatives) {
  EXPECT_THAT(testing::values(relu(Tensor::vector({-1, 2})).data()), ElementsAre(0.0, 2.0));
}

TEST(TensorTest, MatmulRowTimesColumn) {
  const Tensor out = matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  ASSERT_EQ(out.numel(), 1u);
  EXPECT_EQ(out.item(), 11.0);
}

TEST(TensorTest, ShapeMismatchNamesOpAndShapes) {
  try {
    matmul(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)),
           Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_THAT(e.what(), HasSubstr("matmul"));
    EXPECT_THAT(e.what(), HasSubstr("[2x3]"));
  }
  EXPECT_THROW(add(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6})),
               ShapeError);
}

TEST(TensorTest, BroadcastAddsRowVectorAcrossBatch) {
  const Tensor out = add(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::vector({10, 20}));
  EXPECT_THAT(testing::values(out.data()), ElementsAre(11, 22, 13, 24));
}

TEST(TensorTest, OutputRecordedOnlyWhenInputRequiresGrad) {
  const Tensor a = Tensor::vector({1, 2});
  const Tensor b = Tensor::vector({1, 2}, true);
  EXPECT_TRUE(add(a, a).is_leaf());
  EXPECT_FALSE(add(a, b).is_leaf());
  EXPECT_TRUE(add(a, b).requires_grad());
  NoGradGuard guard;
  EXPECT_TRUE(add(a, b).is_leaf());
}

TEST(TensorTest, DropoutRateZeroIsIdentity) {
  const Tensor x = Tensor::vector({1.5, -2.0, 3.0});
  EXPECT_THAT(testing::values(dropout(x, 0.0, 42).data()), ElementsAre(1.5, -2.0, 3.0));
}

TEST(TensorTest, DropoutPreservesMeanOfOnes) {
  const Tensor out = dropout(Tensor::full({1000000}, 1.0), 0.5, 7);
  const double m = std::accumulate(out.data().begin(), out.data().end(), 0.0) / 1e6;
  EXPECT_NEAR(m, 1.0, 0.01);
}

TEST(TensorTest, DropoutSameSeedSameMask) {
  const Tensor x = Tensor::full({1000}, 1.0);
  const Tensor a = dropout(x, 0.3, 99);
  const Tensor b = dropout(x, 0.3, 99);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  const Tensor c = dropout(x, 0.3, 100);
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST(TensorTest, DropoutRejectsRateOfOne) {
  EXPECT_THROW(dropout(Tensor::vector({1.0}), 1.0, 0), std::invalid_argument);
  EXPECT_THROW(dropout(Tensor::vector({1.0}), -0.1, 0), std::invalid_argument);
}

TEST(TensorTest, BackwardOfSumOfSquares) {
  Tensor x = Tensor::vector({1, 2}, true);
  backward(sum(mul(x, x)));
  EXPECT_THAT(testing::values(x.grad()), ElementsAre(2.0, 4.0));
}

TEST(TensorTest, ConstantLossGivesZeroGrads) {
  Tensor x = Tensor::vector({1, 2}, true);
  backward(sum(scale(x, 0.0)));
  EXPECT_THAT(testing::values(x.grad()), ElementsAre(0.0, 0.0));
}

TEST(TensorTest, BackwardRejectsNonScalarLoss) {
  Tensor x = Tensor::vector({1, 2}, true);
  EXPECT_THROW(backward(mul(x, x)), ShapeError);
}

TEST(TensorTest, FanOutAccumulatesExactly) {
  Tensor x = Tensor::vector({3.0}, true);
  backward(sum(add(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(TensorTest, NonFiniteValuesAreHardErrors) {
  EXPECT_THROW(log(Tensor::vector({0.0})), NumericError);
  EXPECT_THROW(exp(Tensor::vector({1000.0})), NumericError);
  EXPECT_THROW(Tensor::vector({std::nan("")}), NumericError);
}

TEST(TensorTest, SgdStepArithmetic) {
  Tensor p = Tensor::scalar(1.0, true);
  backward(scale(p, 0.5));  // grad 0.5
  std::vector<Tensor> params{p};
  sgd_step(params, 0.1);
  EXPECT_DOUBLE_EQ(p.item(), 0.95);
  EXPECT_FALSE(p.has_grad());
}

TEST(TensorTest, SgdZeroLearningRateLeavesParams) {
  Tensor p = Tensor::vector({1.0, -3.0}, true);
  backward(sum(mul(p, p)));
  std::vector<Tensor> params{p};
  sgd_step(params, 0.0);
  EXPECT_THAT(testing::values(p.data()), ElementsAre(1.0, -3.0));
}

TEST(TensorTest, SgdTwoStepsOnSquare) {
  Tensor w = Tensor::scalar(1.0, true);
  std::vector<Tensor> params{w};
  for (int i = 0; i < 2; ++i) {
    backward(mul(w, w));
    sgd_step(params, 0.1);
  }
  EXPECT_NEAR(w.item(), 0.64, 1e-15);
}

TEST(TensorTest, SgdMissingGradNamesParameter) {
  Tensor a = Tensor::scalar(1.0, true);
  Tensor b = Tensor::scalar(1.0, true);
  backward(mul(a, a));
  std::vector<Tensor> params{a, b};
  try {
    sgd_step(params, 0.1);
    FAIL();
  } catch (const std::logic_error& e) {
    EXPECT_THAT(e.what(), HasSubstr("1"));
  }
}

TEST(TensorTest, SoftmaxRowsSumToOneAndArePositive) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor p = softmax(random_matrix(rng, 4, 5, false, -30.0, 30.0));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        EXPECT_GT(p.at(r, c), 0.0);
        total += p.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

// Finite-difference property checks, one per differentiable op.
class OpGradientTest : public ::testing::TestWithParam<const char*> {};

Tensor build_op(const std::string& op, const Tensor& a, const Tensor& b, const Tensor& pos) {
  if (op == "matmul") return sum(mul(matmul(a, b), matmul(a, b)));
  if (op == "add") return sum(mul(add(a, pos), a));
  if (op == "add_broadcast") return sum(mul(add(a, Tensor::vector({0.3, -0.2, 0.1})), a));
  if (op == "sub") return sum(mul(sub(a, pos), pos));
  if (op == "mul") return sum(mul(mul(a, pos), a));
  if (op == "scale") return sum(mul(scale(a, -1.7), a));
  if (op == "add_scalar") return sum(mul(add_scalar(a, 0.4), a));
  if (op == "relu") return sum(mul(relu(a), a));
  if (op == "sigmoid") return sum(mul(sigmoid(a), a));
  if (op == "exp") return sum(mul(exp(a), a));
  if (op == "log") return sum(mul(log(pos), pos));
  if (op == "softmax") return sum(mul(softmax(a), pos));
  if (op == "log_softmax") return sum(mul(log_softmax(a), pos));
  if (op == "mean") return mul(mean(mul(a, a)), mean(pos));
  if (op == "concat") return sum(mul(concat({a, pos}), concat({pos, a})));
  if (op == "dropout") return sum(mul(dropout(a, 0.4, 11), a));
  if (op == "soft_cross_entropy") {
    return soft_cross_entropy(a, Tensor::matrix(3, 3, {0.2, 0.3, 0.5, 1, 0, 0, 0.1, 0.6, 0.3}));
  }
  throw std::invalid_argument(op);
}

TEST_P(OpGradientTest, MatchesCentralDifferences) {
  const std::string op = GetParam();
  Rng rng(derive_seed(17, op));
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = random_matrix(rng, 3, 3);
    // Keep relu inputs away from the kink.
    for (double& v : a.mutable_data()) {
      if (std::abs(v) < 1e-2) v += 0.05;
    }
    Tensor b = random_matrix(rng, 3, 3);
    Tensor pos = random_matrix(rng, 3, 3, true, 0.2, 2.0);
    std::vector<Tensor> params{a, b, pos};
    const auto check =
        testing::check_gradients([&] { return build_op(op, a, b, pos); }, params, 1e-5);
    ASSERT_LE(check.relative_error, 1e-4) << op << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradientTest,
                         ::testing::Values("matmul", "add", "add_broadcast", "sub", "mul", "scale",
                                           "add_scalar", "relu", "sigmoid", "exp", "log",
                                           "softmax", "log_softmax", "mean", "concat", "dropout",
                                           "soft_cross_entropy"));

TEST(TensorTest, TwoLayerMlpGradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_matrix(rng, 5, 3, false);
    Tensor w1 = random_matrix(rng, 3, 6);
    Tensor b1 = Tensor::vector({0.1, -0.1, 0.2, 0.0, 0.05, -0.2}, true);
    Tensor w2 = random_matrix(rng, 6, 2);
    Tensor b2 = Tensor::vector({0.0, 0.1}, true);
    const Tensor targets = Tensor::matrix(5, 2, {1, 0, 0, 1, 1, 0, 0, 1, 0.5, 0.5});
    auto loss = [&] {
      return soft_cross_entropy(add(matmul(relu(add(matmul(x, w1), b1)), w2), b2), targets);
    };
    const auto check = testing::check_gradients(loss, {w1, b1, w2, b2});
    EXPECT_LE(check.relative_error, 1e-4);
  }
}

TEST(TensorTest, DetachAndCloneCutTheGraph) {
  Tensor x = Tensor::vector({1, 2}, true);
  const Tensor y = mul(x, x);
  EXPECT_FALSE(y.detach().requires_grad());
  EXPECT_TRUE(y.detach().is_leaf());
  const Tensor c = x.clone();
  EXPECT_TRUE(c.requires_grad());
  EXPECT_NE(c.node().get(), x.node().get());
}

}  // namespace
}  // namespace sslcalib
