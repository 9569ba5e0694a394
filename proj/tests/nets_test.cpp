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
#include <vector>

#include "ordermat/errors.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/order.hpp"
#include "ordermat/rng.hpp"
#include "ordermat/tensor_io.hpp"

namespace ordermat {
namespace {

NetConfig small_config(int n, ActionSpace space, EncoderAttention attn = EncoderAttention::full) {
   NetConfig c;
   c.n_agents = n;
   c.obs_dim = 3;
   c.action_space = space;
   c.hidden_dim = 8;
   c.n_blocks = 2;
   c.n_heads = 2;
   c.encoder_attention = attn;
   c.output_gain = 1.0;
   return c;
}

std::vector< double > random_values(std::size_t count, Rng& rng) {
   std::vector< double > v(count);
   for(auto& x : v) {
      x = uniform(rng, -1.0, 1.0);
   }
   return v;
}

std::vector< double > random_actions(const ActionSpace& space, std::size_t count, Rng& rng) {
   std::vector< double > v(count * static_cast< std::size_t >(space.width()));
   for(auto& x : v) {
      x = space.kind == ActionKind::discrete ? static_cast< double >(uniform_index(rng, static_cast< std::size_t >(space.categories)))
                                             : uniform(rng, -1.0, 1.0);
   }
   return v;
}

double max_abs_diff_slot(const Tensor& a, const Tensor& b, std::size_t slot, std::size_t slots) {
   const std::size_t per = a.numel() / slots;
   double m = 0.0;
   for(std::size_t i = 0; i < per; ++i) {
      m = std::max(m, std::abs(a.value(slot * per + i) - b.value(slot * per + i)));
   }
   return m;
}

class Causality : public ::testing::TestWithParam< ActionKind > {};

TEST_P(Causality, SlotIgnoresLaterPositions) {
   const ActionSpace space = GetParam() == ActionKind::discrete ? ActionSpace::discrete(3) : ActionSpace::continuous(2, -1, 1);
   Rng rng(17);
   for(int n = 1; n <= 5; ++n) {
      TransformerActorCritic net(small_config(n, space), 100 + static_cast< std::uint64_t >(n));
      const auto nn = static_cast< std::size_t >(n);
      const auto w = static_cast< std::size_t >(space.width());
      auto reps_v = random_values(nn * 8, rng);
      auto acts_v = random_actions(space, nn, rng);
      Tensor reps(Shape{1, nn, 8}, reps_v);
      auto base = net.decode_parallel(reps, Tensor(Shape{1, nn, w}, acts_v));
      for(std::size_t m = 0; m < nn; ++m) {
         // perturb every representation after m and every action at or after m
         auto r2 = reps_v;
         for(std::size_t i = (m + 1) * 8; i < r2.size(); ++i) {
            r2[i] += uniform(rng, -2.0, 2.0);
         }
         auto a2 = random_actions(space, nn, rng);
         std::copy_n(acts_v.begin(), m * w, a2.begin());
         auto out = net.decode_parallel(Tensor(Shape{1, nn, 8}, r2), Tensor(Shape{1, nn, w}, a2));
         EXPECT_LT(max_abs_diff_slot(base.action_out, out.action_out, m, nn), 1e-12) << "n=" << n << " m=" << m;
         EXPECT_LT(max_abs_diff_slot(base.next_agent_logits, out.next_agent_logits, m, nn), 1e-12);
      }
   }
}

TEST_P(Causality, TeacherForcingMatchesSequentialDecode) {
   const ActionSpace space = GetParam() == ActionKind::discrete ? ActionSpace::discrete(3) : ActionSpace::continuous(2, -1, 1);
   Rng rng(23);
   for(int n = 1; n <= 5; ++n) {
      TransformerActorCritic net(small_config(n, space), 200 + static_cast< std::uint64_t >(n));
      const auto nn = static_cast< std::size_t >(n);
      const auto w = static_cast< std::size_t >(space.width());
      const auto head = static_cast< std::size_t >(space.head_size());
      Tensor reps(Shape{1, nn, 8}, random_values(nn * 8, rng));
      auto acts = random_actions(space, nn, rng);
      auto par = net.decode_parallel(reps, Tensor(Shape{1, nn, w}, acts));
      for(int m = 1; m <= n; ++m) {
         const auto slot = static_cast< std::size_t >(m - 1);
         auto step = net.decode_step(reps, std::span< const double >(acts).first(slot * w), m);
         for(std::size_t k = 0; k < nn; ++k) {
            EXPECT_NEAR(step.next_agent_logits[k], par.next_agent_logits.value(slot * nn + k), 1e-10);
         }
         if(space.kind == ActionKind::continuous) {
            for(std::size_t k = 0; k < head; ++k) {
               EXPECT_NEAR(step.action_mean[k], par.action_out.value(slot * head + k), 1e-10);
            }
         } else {
            double z = 0.0;
            for(std::size_t k = 0; k < head; ++k) {
               z += std::exp(par.action_out.value(slot * head + k));
            }
            for(std::size_t k = 0; k < head; ++k) {
               EXPECT_NEAR(step.action_probs[k], std::exp(par.action_out.value(slot * head + k)) / z, 1e-10);
            }
         }
      }
   }
}

INSTANTIATE_TEST_SUITE_P(BothSpaces, Causality, ::testing::Values(ActionKind::discrete, ActionKind::continuous));

TEST(Encoder, ShapesAndPermutationEquivariance) {
   Rng rng(31);
   TransformerActorCritic net(small_config(4, ActionSpace::discrete(2)), 3);
   auto obs_v = random_values(2 * 4 * 3, rng);
   auto enc = net.encode(Tensor(Shape{2, 4, 3}, obs_v));
   EXPECT_EQ(enc.reps.shape(), (Shape{2, 4, 8}));
   EXPECT_EQ(enc.values.shape(), (Shape{2, 4}));
   // full attention without positions: permuting agents permutes outputs
   DecisionOrder ao({2, 0, 3, 1});
   std::vector< double > permuted;
   for(int b = 0; b < 2; ++b) {
      auto block = std::span< const double >(obs_v).subspan(static_cast< std::size_t >(b) * 12, 12);
      auto s = swap_rows_by_order(block, 3, ao);
      permuted.insert(permuted.end(), s.begin(), s.end());
   }
   auto enc2 = net.encode(Tensor(Shape{2, 4, 3}, permuted));
   for(int b = 0; b < 2; ++b) {
      for(int k = 0; k < 4; ++k) {
         EXPECT_NEAR(enc2.values.value(static_cast< std::size_t >(b * 4 + k)), enc.values.value(static_cast< std::size_t >(b * 4 + ao[static_cast< std::size_t >(k)])), 1e-12);
      }
   }
}

TEST(Encoder, LocalAttentionKeepsAgentsSeparate) {
   Rng rng(37);
   TransformerActorCritic net(small_config(3, ActionSpace::discrete(2), EncoderAttention::local), 5);
   auto obs_v = random_values(9, rng);
   auto base = net.encode(Tensor(Shape{1, 3, 3}, obs_v));
   obs_v[0] += 0.7;  // agent 0 only
   auto out = net.encode(Tensor(Shape{1, 3, 3}, obs_v));
   EXPECT_GT(std::abs(out.values.value(0) - base.values.value(0)), 0.0);
   EXPECT_EQ(out.values.value(1), base.values.value(1));
   EXPECT_EQ(out.values.value(2), base.values.value(2));
}

TEST(Encoder, WrongObservationShapeThrows) {
   TransformerActorCritic net(small_config(3, ActionSpace::discrete(2)), 5);
   EXPECT_THROW(static_cast< void >(net.encode(Tensor::zeros({1, 2, 3}))), InvalidArgument);
   EXPECT_THROW(static_cast< void >(net.encode(Tensor::zeros({1, 3, 4}))), InvalidArgument);
}

TEST(Decoder, DiscreteActionOutOfRangeThrows) {
   TransformerActorCritic net(small_config(2, ActionSpace::discrete(2)), 5);
   Tensor reps = Tensor::zeros({1, 2, 8});
   EXPECT_THROW(static_cast< void >(net.decode_parallel(reps, Tensor({1, 2, 1}, {2.0, 0.0}))), InvalidArgument);
   EXPECT_THROW(static_cast< void >(net.decode_parallel(reps, Tensor({1, 2, 1}, {0.5, 0.0}))), InvalidArgument);
   EXPECT_THROW(static_cast< void >(net.decode_step(reps, std::vector< double >{}, 3)), InvalidArgument);
}

TEST(Decoder, OutputShapes) {
   TransformerActorCritic net(small_config(3, ActionSpace::continuous(2, -1, 1)), 9);
   auto out = net.decode_parallel(Tensor::zeros({4, 3, 8}), Tensor::zeros({4, 3, 2}));
   EXPECT_EQ(out.action_out.shape(), (Shape{4, 3, 2}));
   EXPECT_EQ(out.next_agent_logits.shape(), (Shape{4, 3, 3}));
   EXPECT_EQ(out.log_std.shape(), (Shape{2}));
   for(double v : out.log_std.data()) {
      EXPECT_EQ(v, 0.0);
   }
}

TEST(NetConfig, ValidationAndJson) {
   auto c = small_config(3, ActionSpace::continuous(2, -0.5, 0.5), EncoderAttention::local);
   EXPECT_EQ(net_config_from_json(to_json(c)), c);
   c.n_heads = 3;
   EXPECT_THROW(c.validate(), InvalidArgument);
   c = small_config(0, ActionSpace::discrete(2));
   EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Net, SameSeedSameParameters) {
   TransformerActorCritic a(small_config(3, ActionSpace::discrete(2)), 42);
   TransformerActorCritic b(small_config(3, ActionSpace::discrete(2)), 42);
   TransformerActorCritic c(small_config(3, ActionSpace::discrete(2)), 43);
   auto ta = a.parameters().tensors();
   auto tb = b.parameters().tensors();
   auto tc = c.parameters().tensors();
   bool any_diff = false;
   for(std::size_t i = 0; i < ta.size(); ++i) {
      EXPECT_TRUE(std::equal(ta[i].data().begin(), ta[i].data().end(), tb[i].data().begin()));
      any_diff = any_diff || ! std::equal(ta[i].data().begin(), ta[i].data().end(), tc[i].data().begin());
   }
   EXPECT_TRUE(any_diff);
   EXPECT_EQ(a.encoder_parameters().size() + a.decoder_parameters().size(), a.parameters().size());
}

TEST(Checkpoint, RoundTripIsExact) {
   const auto dir = std::filesystem::temp_directory_path() / "ordermat_nets_test";
   std::filesystem::remove_all(dir);
   TransformerActorCritic net(small_config(3, ActionSpace::continuous(1, -1, 1)), 77);
   net.parameters().set_values("decoder.log_std", std::vector< double >{-0.3});
   save_checkpoint(dir / "ckpt", net, {{"note", "x"}});
   auto loaded = load_checkpoint(dir / "ckpt");
   EXPECT_EQ(loaded.config(), net.config());
   auto a = net.parameters().tensors();
   auto b = loaded.parameters().tensors();
   ASSERT_EQ(a.size(), b.size());
   for(std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_TRUE(std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin()));
   }
   EXPECT_THROW(load_checkpoint(dir / "missing"), IoError);
   std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ordermat
