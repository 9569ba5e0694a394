// Copyright 2026 The ordermat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ordermat/errors.hpp"
#include "ordermat/nn.hpp"
#include "ordermat/optim.hpp"
#include "ordermat/rng.hpp"
#include "ordermat/tensor.hpp"

namespace ordermat {
namespace {

Tensor random_leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
   std::vector< double > v(shape_numel(shape));
   for(auto& x : v) {
      x = uniform(rng, lo, hi);
   }
   return Tensor(std::move(shape), std::move(v), true);
}

// Weighted sum with fixed random weights so every output element matters.
Tensor probe(const Tensor& t, std::uint64_t seed = 7) {
   Rng rng(seed);
   std::vector< double > w(t.numel());
   for(auto& x : w) {
      x = uniform(rng, -1.0, 1.0);
   }
   return sum(multiply(t, Tensor(t.shape(), w)));
}

void expect_grad_ok(const std::function< Tensor() >& f, std::vector< Tensor > leaves, double tol = 1e-6) {
   EXPECT_LT(finite_diff_check(f, leaves), tol);
}

TEST(Tensor, MatmulKnownValues) {
   Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
   Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
   auto c = matmul(a, b);
   ASSERT_EQ(c.shape(), (Shape{2, 2}));
   EXPECT_EQ(std::vector< double >(c.data().begin(), c.data().end()), (std::vector< double >{58, 64, 139, 154}));
}

TEST(Tensor, BmmMatchesPerBatchMatmul) {
   Rng rng(3);
   auto a = random_leaf({3, 2, 4}, rng);
   auto b = random_leaf({3, 4, 5}, rng);
   auto c = bmm(a, b);
   for(std::size_t i = 0; i < 3; ++i) {
      auto ai = reshape(narrow(a, 0, i, 1), {2, 4});
      auto bi = reshape(narrow(b, 0, i, 1), {4, 5});
      auto ci = matmul(ai, bi);
      for(std::size_t k = 0; k < 10; ++k) {
         EXPECT_NEAR(c.value(i * 10 + k), ci.value(k), 1e-14);
      }
   }
}

TEST(Tensor, SoftmaxRowsSumToOneAndSurviveLargeLogits) {
   Tensor x({2, 3}, {1000.0, 1001.0, 1002.0, -5.0, 0.0, kMaskedLogit});
   auto p = softmax(x);
   EXPECT_NEAR(p.value(0) + p.value(1) + p.value(2), 1.0, 1e-15);
   EXPECT_NEAR(p.value(3) + p.value(4) + p.value(5), 1.0, 1e-15);
   EXPECT_EQ(p.value(5), 0.0);
}

TEST(Tensor, LayerNormZeroMeanUnitVariance) {
   Rng rng(5);
   auto x = random_leaf({4, 6}, rng, -3.0, 3.0);
   auto y = layer_norm(x, Tensor::full({6}, 1.0), Tensor::zeros({6}));
   for(std::size_t r = 0; r < 4; ++r) {
      double mu = 0.0;
      double var = 0.0;
      for(std::size_t j = 0; j < 6; ++j) {
         mu += y.value(r * 6 + j) / 6.0;
      }
      for(std::size_t j = 0; j < 6; ++j) {
         var += (y.value(r * 6 + j) - mu) * (y.value(r * 6 + j) - mu) / 6.0;
      }
      EXPECT_NEAR(mu, 0.0, 1e-12);
      EXPECT_NEAR(var, 1.0, 1e-4);
   }
}

TEST(Tensor, NonFiniteOutputThrows) {
   Tensor x({2}, {1.0, -1.0});
   EXPECT_THROW(static_cast< void >(log(x)), NumericError);
   Tensor big({1}, {1000.0});
   EXPECT_THROW(static_cast< void >(exp(big)), NumericError);
   EXPECT_THROW(Tensor({1}, {std::numeric_limits< double >::quiet_NaN()}), NumericError);
}

TEST(Tensor, ShapeErrorsThrow) {
   EXPECT_THROW(static_cast< void >(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}))), InvalidArgument);
   EXPECT_THROW(static_cast< void >(add(Tensor::zeros({2, 3}), Tensor::zeros({2}))), InvalidArgument);
   EXPECT_THROW(static_cast< void >(reshape(Tensor::zeros({2, 3}), {4})), InvalidArgument);
}

TEST(Tensor, BackwardRequiresScalar) {
   auto x = Tensor::zeros({2}, true);
   EXPECT_THROW(scale(x, 2.0).backward(), InvalidArgument);
}

TEST(Tensor, NoGradGuardStopsRecording) {
   auto x = Tensor::full({2}, 1.0, true);
   {
      NoGradGuard guard;
      EXPECT_FALSE(scale(x, 2.0).requires_grad());
   }
   EXPECT_TRUE(scale(x, 2.0).requires_grad());
}

TEST(Tensor, LeafGradientsAccumulate) {
   auto x = Tensor::full({3}, 2.0, true);
   sum(square(x)).backward();
   sum(square(x)).backward();
   for(double g : x.grad()) {
      EXPECT_DOUBLE_EQ(g, 8.0);
   }
   x.zero_grad();
   for(double g : x.grad()) {
      EXPECT_EQ(g, 0.0);
   }
}

TEST(Tensor, MaskFillBlocksGradient) {
   auto x = Tensor({3}, {1.0, 2.0, 3.0}, true);
   std::vector< std::uint8_t > mask = {0, 1, 0};
   sum(mask_fill(x, mask, -7.0)).backward();
   EXPECT_EQ(x.grad(), (std::vector< double >{1.0, 0.0, 1.0}));
}

TEST(TensorGrad, Elementwise) {
   Rng rng(11);
   auto a = random_leaf({2, 3, 4}, rng);
   auto b = random_leaf({3, 4}, rng);
   auto pos = random_leaf({2, 3, 4}, rng, 0.5, 2.0);
   expect_grad_ok([&] { return probe(add(a, b)); }, {a, b});
   expect_grad_ok([&] { return probe(subtract(a, b)); }, {a, b});
   expect_grad_ok([&] { return probe(multiply(a, b)); }, {a, b});
   expect_grad_ok([&] { return probe(minimum(a, pos)); }, {a, pos});
   expect_grad_ok([&] { return probe(exp(a)); }, {a});
   expect_grad_ok([&] { return probe(log(pos)); }, {pos});
   expect_grad_ok([&] { return probe(tanh(a)); }, {a});
   expect_grad_ok([&] { return probe(gelu(a)); }, {a});
   expect_grad_ok([&] { return probe(square(a)); }, {a});
   expect_grad_ok([&] { return probe(scale(add_scalar(a, 0.3), -1.7)); }, {a});
   expect_grad_ok([&] { return probe(clamp(a, -0.5, 0.5)); }, {a});
}

TEST(TensorGrad, Reductions) {
   Rng rng(12);
   auto a = random_leaf({2, 3, 4}, rng);
   expect_grad_ok([&] { return sum(square(a)); }, {a});
   expect_grad_ok([&] { return mean(square(a)); }, {a});
   expect_grad_ok([&] { return probe(sum_last(a)); }, {a});
   expect_grad_ok([&] { return probe(softmax(a)); }, {a});
   expect_grad_ok([&] { return probe(log_softmax(a)); }, {a});
}

TEST(TensorGrad, LinearAlgebraAndLayout) {
   Rng rng(13);
   auto a = random_leaf({2, 3, 4}, rng);
   auto w = random_leaf({4, 5}, rng);
   auto b = random_leaf({2, 4, 3}, rng);
   auto g = random_leaf({4}, rng, 0.5, 1.5);
   auto beta = random_leaf({4}, rng);
   expect_grad_ok([&] { return probe(matmul(a, w)); }, {a, w});
   expect_grad_ok([&] { return probe(bmm(a, b)); }, {a, b});
   expect_grad_ok([&] { return probe(transpose(a)); }, {a});
   expect_grad_ok([&] { return probe(layer_norm(a, g, beta)); }, {a, g, beta});
   expect_grad_ok([&] { return probe(reshape(a, {6, 4})); }, {a});
   expect_grad_ok([&] { return probe(narrow(a, 1, 1, 2)); }, {a});
   expect_grad_ok([&] { return probe(concat({a, narrow(a, 1, 0, 1)}, 1)); }, {a});
   std::vector< int > rows = {2, 0, 1, 1};
   expect_grad_ok([&] { return probe(gather_rows(a, rows, 2)); }, {a});
   std::vector< int > cols = {0, 3, 1, 2, 2, 0};
   expect_grad_ok([&] { return probe(gather_last(a, cols)); }, {a});
}

TEST(Tensor, GatherRowsCopiesSelectedRows) {
   Tensor a({1, 3, 2}, {0, 1, 10, 11, 20, 21});
   std::vector< int > idx = {2, 0, 1};
   auto g = gather_rows(a, idx, 3);
   EXPECT_EQ(std::vector< double >(g.data().begin(), g.data().end()), (std::vector< double >{20, 21, 0, 1, 10, 11}));
   std::vector< int > bad = {3, 0, 1};
   EXPECT_THROW(static_cast< void >(gather_rows(a, bad, 3)), InvalidArgument);
}

}  // namespace
}  // namespace ordermat
