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
#include <filesystem>
#include <set>
#include <vector>

#include "ordermat/envs.hpp"
#include "ordermat/errors.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/rollout.hpp"

namespace ordermat {
namespace {

NetConfig config_for(const Env& env) {
   NetConfig c;
   c.n_agents = env.spec().n_agents;
   c.obs_dim = env.spec().obs_dim;
   c.action_space = env.spec().action_space;
   c.hidden_dim = 8;
   c.n_blocks = 1;
   c.n_heads = 1;
   c.output_gain = 1.0;
   return c;
}

TEST(Rollout, LearnedOrderBatchIsConsistent) {
   InformedLeader env(4, 3, 5);
   TransformerActorCritic net(config_for(env), 1);
   RolloutWorker worker(env, OrderStrategy::parse("learned"), 2, 3, 7);
   auto b = worker.collect(net, 10);
   EXPECT_NO_THROW(b.validate());
   EXPECT_EQ(b.rows(), 30);
   EXPECT_TRUE(b.learned_order);
   std::set< std::vector< int > > seen;
   for(int r = 0; r < b.rows(); ++r) {
      auto ao = b.order(r);
      EXPECT_EQ(ao[0], 2);
      seen.insert(ao.indices());
      for(int k = 0; k < 4; ++k) {
         EXPECT_LE(b.action_log_probs[static_cast< std::size_t >(r * 4 + k)], 0.0);
      }
      for(int k = 0; k < 3; ++k) {
         EXPECT_LE(b.agent_log_probs[static_cast< std::size_t >(r * 3 + k)], 0.0);
      }
      // last choice has one feasible agent
      EXPECT_EQ(b.agent_log_probs[static_cast< std::size_t >(r * 3 + 2)], 0.0);
      EXPECT_GE(b.order_entropy[static_cast< std::size_t >(r)], 0.0);
      EXPECT_LE(b.order_entropy[static_cast< std::size_t >(r)], std::log(3.0));
   }
   EXPECT_GT(seen.size(), 1U);
   // 3 envs x 10 steps, episodes of 5: two full episodes per env
   EXPECT_EQ(b.episode_returns.size(), 6U);
   for(int e = 0; e < 3; ++e) {
      EXPECT_EQ(b.dones[static_cast< std::size_t >(4 * 3 + e)], 1);
      EXPECT_EQ(b.dones[static_cast< std::size_t >(3 * 3 + e)], 0);
   }
}

TEST(Rollout, EpisodesContinueAcrossCollects) {
   InformedLeader env(2, 1, 6);
   TransformerActorCritic net(config_for(env), 2);
   RolloutWorker worker(env, OrderStrategy::parse("sorted"), 0, 2, 3);
   auto first = worker.collect(net, 4);
   EXPECT_TRUE(first.episode_returns.empty());
   auto second = worker.collect(net, 4);
   EXPECT_EQ(second.episode_returns.size(), 2U);
   EXPECT_EQ(second.dones[static_cast< std::size_t >(1 * 2)], 1);
   double sum = 0.0;
   for(int t = 0; t < 4; ++t) {
      sum += first.rewards[static_cast< std::size_t >(t * 2)];
   }
   for(int t = 0; t < 2; ++t) {
      sum += second.rewards[static_cast< std::size_t >(t * 2)];
   }
   EXPECT_NEAR(second.episode_returns[0], sum, 1e-12);
}

TEST(Rollout, FixedStrategiesFollowTheirOrders) {
   ChainSpread env(3, 0.8, 2);
   TransformerActorCritic net(config_for(env), 3);
   for(const char* s : {"sorted", "inverse", "fixed:0,2,1"}) {
      auto strategy = OrderStrategy::parse(s);
      auto b = collect(env, net, strategy, 0, 6, 9);
      EXPECT_FALSE(b.learned_order);
      OrderSchedule sched(strategy, 3, 0);
      Rng rng(0);
      const auto expected = *sched.next_order(rng);
      for(int r = 0; r < b.rows(); ++r) {
         EXPECT_EQ(b.order(r), expected) << s;
      }
   }
}

TEST(Rollout, NextValuesShiftByOneStep) {
   InformedLeader env(2, 0, 3);
   TransformerActorCritic net(config_for(env), 4);
   RolloutWorker worker(env, OrderStrategy::parse("learned"), 0, 2, 5);
   auto b = worker.collect(net, 3);
   auto next = b.next_values();
   for(int t = 0; t < 2; ++t) {
      for(int e = 0; e < 2; ++e) {
         for(int i = 0; i < 2; ++i) {
            EXPECT_EQ(next[static_cast< std::size_t >((t * 2 + e) * 2 + i)], b.values[static_cast< std::size_t >(((t + 1) * 2 + e) * 2 + i)]);
         }
      }
   }
   for(int e = 0; e < 2; ++e) {
      EXPECT_EQ(next[static_cast< std::size_t >((2 * 2 + e) * 2)], b.bootstrap_values[static_cast< std::size_t >(e * 2)]);
   }
}

TEST(Rollout, SameSeedSameBatch) {
   ChainSpread env(3, 0.8, 2);
   TransformerActorCritic net(config_for(env), 5);
   auto a = collect(env, net, OrderStrategy::parse("learned"), 0, 8, 42);
   auto b = collect(env, net, OrderStrategy::parse("learned"), 0, 8, 42);
   EXPECT_EQ(a.actions, b.actions);
   EXPECT_EQ(a.orders, b.orders);
   EXPECT_EQ(a.rewards, b.rewards);
}

TEST(Rollout, BatchSaveLoadRoundTrip) {
   const auto dir = std::filesystem::temp_directory_path() / "ordermat_rollout_test";
   std::filesystem::remove_all(dir);
   std::filesystem::create_directories(dir);
   ChainSpread env(3, 0.8, 2);
   TransformerActorCritic net(config_for(env), 6);
   RolloutWorker worker(env, OrderStrategy::parse("learned"), 1, 2, 8);
   auto b = worker.collect(net, 5);
   save_trajectory_batch(dir / "batch", b);
   auto c = load_trajectory_batch(dir / "batch");
   EXPECT_EQ(c.steps, b.steps);
   EXPECT_EQ(c.n_envs, b.n_envs);
   EXPECT_EQ(c.learned_order, b.learned_order);
   EXPECT_EQ(c.obs, b.obs);
   EXPECT_EQ(c.actions, b.actions);
   EXPECT_EQ(c.orders, b.orders);
   EXPECT_EQ(c.rewards, b.rewards);
   EXPECT_EQ(c.dones, b.dones);
   EXPECT_EQ(c.values, b.values);
   EXPECT_EQ(c.bootstrap_values, b.bootstrap_values);
   EXPECT_EQ(c.action_log_probs, b.action_log_probs);
   EXPECT_EQ(c.agent_log_probs, b.agent_log_probs);
   EXPECT_EQ(c.order_entropy, b.order_entropy);
   EXPECT_EQ(c.episode_returns, b.episode_returns);
   EXPECT_THROW(load_trajectory_batch(dir / "missing"), IoError);
   std::filesystem::remove_all(dir);
}

TEST(Rollout, BatchValidateCatchesSizeMismatch) {
   InformedLeader env(2, 0, 3);
   TransformerActorCritic net(config_for(env), 7);
   auto b = collect(env, net, OrderStrategy::parse("sorted"), 0, 3, 1);
   b.rewards.pop_back();
   EXPECT_THROW(b.validate(), InvalidArgument);
}

TEST(Decide, GreedyIsDeterministicAndRespectsLead) {
   InformedLeader env(4, 3, 2);
   TransformerActorCritic net(config_for(env), 8);
   Rng r0(1);
   auto s = env.reset(r0);
   std::vector< JointObservation > obs = {env.observe(s), env.observe(s)};
   std::vector< std::optional< DecisionOrder > > none(2);
   Rng a(3);
   Rng b(99);
   auto da = decide(net, obs, none, 1, SelectMode::greedy, SelectMode::greedy, a);
   auto db = decide(net, obs, none, 1, SelectMode::greedy, SelectMode::greedy, b);
   EXPECT_EQ(da.orders[0], db.orders[0]);
   EXPECT_EQ(da.orders[0], da.orders[1]);
   EXPECT_EQ(da.orders[0][0], 1);
   EXPECT_EQ(da.actions, db.actions);
   EXPECT_EQ(da.order_entropies.size(), 6U);
}

TEST(Evaluate, SummaryStatisticsAndDeterminism) {
   InformedLeader env(3, 2, 4);
   TransformerActorCritic net(config_for(env), 9);
   auto e1 = evaluate(env, net, OrderStrategy::parse("learned"), 0, 12, 5);
   auto e2 = evaluate(env, net, OrderStrategy::parse("learned"), 0, 12, 5);
   EXPECT_EQ(e1.returns, e2.returns);
   ASSERT_EQ(e1.returns.size(), 12U);
   double m = 0.0;
   for(double r : e1.returns) {
      m += r / 12.0;
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 8.0);
   }
   EXPECT_NEAR(e1.mean, m, 1e-12);
   EXPECT_LE(e1.q25, e1.median);
   EXPECT_LE(e1.median, e1.q75);
   EXPECT_EQ(e1.position_entropy.size(), 2U);
   EXPECT_EQ(e1.entropy_trace.size(), 12U * 4U);
}

TEST(Quantile, LinearInterpolation) {
   EXPECT_EQ(quantile({4.0, 1.0, 3.0, 2.0}, 0.0), 1.0);
   EXPECT_EQ(quantile({4.0, 1.0, 3.0, 2.0}, 1.0), 4.0);
   EXPECT_NEAR(quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5, 1e-15);
   EXPECT_NEAR(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25), 2.0, 1e-15);
   EXPECT_EQ(quantile({}, 0.5), 0.0);
}

}  // namespace
}  // namespace ordermat
