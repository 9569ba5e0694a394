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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ordermat/errors.hpp"
#include "ordermat/oracle.hpp"
#include "ordermat/rng.hpp"

namespace ordermat {
namespace {

// ---- independent reference: value iteration and explicit marginalization

struct Reference {
   std::vector< double > v;
   std::vector< double > q;  // [S * J]
};

Reference value_iteration(const TabularGame& g, const ProductPolicy& pi) {
   const int S = g.n_states;
   const int J = g.joint_count();
   Reference r;
   r.v.assign(static_cast< std::size_t >(S), 0.0);
   r.q.assign(static_cast< std::size_t >(S * J), 0.0);
   // gamma <= 0.95: 1500 sweeps contract the error below 1e-30
   for(int it = 0; it < 1500; ++it) {
      for(int s = 0; s < S; ++s) {
         for(int j = 0; j < J; ++j) {
            double next = 0.0;
            for(int s2 = 0; s2 < S; ++s2) {
               next += g.transition[static_cast< std::size_t >((s * J + j) * S + s2)] * r.v[static_cast< std::size_t >(s2)];
            }
            r.q[static_cast< std::size_t >(s * J + j)] = g.reward[static_cast< std::size_t >(s * J + j)] + g.gamma * next;
         }
      }
      for(int s = 0; s < S; ++s) {
         double v = 0.0;
         for(int j = 0; j < J; ++j) {
            auto a = g.joint_action(j);
            v += pi.joint_prob(s, a) * r.q[static_cast< std::size_t >(s * J + j)];
         }
         r.v[static_cast< std::size_t >(s)] = v;
      }
   }
   return r;
}

// E over the agents not in `fixed` of Q(s, a), with fixed agents pinned.
double marginal_q(const TabularGame& g, const ProductPolicy& pi, const Reference& ref, int s, const std::vector< int >& fixed, std::span< const int > joint) {
   const int J = g.joint_count();
   double total = 0.0;
   for(int j = 0; j < J; ++j) {
      auto a = g.joint_action(j);
      double w = 1.0;
      for(int i = 0; i < g.n_agents(); ++i) {
         const bool pinned = std::find(fixed.begin(), fixed.end(), i) != fixed.end();
         if(pinned) {
            w *= a[static_cast< std::size_t >(i)] == joint[static_cast< std::size_t >(i)] ? 1.0 : 0.0;
         } else {
            w *= pi.probs[static_cast< std::size_t >(i)][static_cast< std::size_t >(s)][static_cast< std::size_t >(a[static_cast< std::size_t >(i)])];
         }
      }
      total += w * ref.q[static_cast< std::size_t >(s * J + j)];
   }
   return total;
}

TEST(Decomposition, MatchesReferenceOnRandomGames) {
   Rng rng(2024);
   for(int game_id = 0; game_id < 20; ++game_id) {
      const int n = 2 + game_id % 2;
      auto g = TabularGame::random(rng, n, 3, 3, 0.9);
      auto pi = ProductPolicy::random(rng, g);
      const auto ref = value_iteration(g, pi);
      std::vector< int > perm(static_cast< std::size_t >(n));
      std::iota(perm.begin(), perm.end(), 0);
      const int s = static_cast< int >(uniform_index(rng, 3));
      const auto joint = g.joint_action(static_cast< int >(uniform_index(rng, static_cast< std::size_t >(g.joint_count()))));
      do {
         DecisionOrder ao(perm);
         auto dec = tabular_advantages(g, pi, s, joint, ao);
         const double joint_ref = ref.q[static_cast< std::size_t >(s * g.joint_count() + g.joint_index(joint))] - ref.v[static_cast< std::size_t >(s)];
         EXPECT_NEAR(dec.joint, joint_ref, 1e-9);
         std::vector< int > fixed;
         double prev = marginal_q(g, pi, ref, s, fixed, joint);
         double sum = 0.0;
         for(int m = 0; m < n; ++m) {
            fixed.push_back(perm[static_cast< std::size_t >(m)]);
            const double cur = marginal_q(g, pi, ref, s, fixed, joint);
            EXPECT_NEAR(dec.sequential[static_cast< std::size_t >(m)], cur - prev, 1e-9);
            sum += dec.sequential[static_cast< std::size_t >(m)];
            prev = cur;
         }
         EXPECT_NEAR(sum, dec.joint, 1e-10);
      } while(std::next_permutation(perm.begin(), perm.end()));
   }
}

TEST(Decomposition, TwoAgentMatrixGameAllOrders) {
   // single state, gamma irrelevant after one step of self-loop
   TabularGame g;
   g.n_states = 1;
   g.action_counts = {2, 2};
   g.gamma = 0.5;
   g.reward = {3.0, 0.0, 1.0, 2.0};
   g.transition = {1.0, 1.0, 1.0, 1.0};
   ProductPolicy pi;
   pi.probs = {{{0.3, 0.7}}, {{0.6, 0.4}}};
   for(int j = 0; j < 4; ++j) {
      auto a = g.joint_action(j);
      for(auto order : {std::vector< int >{0, 1}, std::vector< int >{1, 0}}) {
         auto dec = tabular_advantages(g, pi, 0, a, DecisionOrder(order));
         EXPECT_NEAR(dec.sequential[0] + dec.sequential[1], dec.joint, 1e-12);
      }
   }
   // hand value: E[r] = .3*.6*3 + .3*.4*0 + .7*.6*1 + .7*.4*2 = 1.52, A(0,0) = 3 - 1.52
   auto dec = tabular_advantages(g, pi, 0, std::vector< int >{0, 0}, DecisionOrder({0, 1}));
   EXPECT_NEAR(dec.joint, 3.0 - 1.52, 1e-12);
}

TEST(Decomposition, SymmetricGameUniformPolicyEqualAdvantages) {
   TabularGame g;
   g.n_states = 1;
   g.action_counts = {2, 2};
   g.gamma = 0.9;
   g.reward = {1.0, 0.0, 0.0, 1.0};  // coordination, symmetric in the agents
   g.transition = {1.0, 1.0, 1.0, 1.0};
   auto pi = ProductPolicy::uniform(g);
   for(int j = 0; j < 4; ++j) {
      auto a = g.joint_action(j);
      auto first0 = tabular_advantages(g, pi, 0, a, DecisionOrder({0, 1}));
      auto first1 = tabular_advantages(g, pi, 0, a, DecisionOrder({1, 0}));
      EXPECT_NEAR(first0.sequential[0], first1.sequential[0], 1e-12);
   }
}

TEST(Decomposition, OnPolicyActionOfDeterministicPolicyHasZeroAdvantage) {
   Rng rng(9);
   auto g = TabularGame::random(rng, 3, 2, 2, 0.8);
   ProductPolicy pi = ProductPolicy::uniform(g);
   for(auto& agent : pi.probs) {
      for(auto& row : agent) {
         std::fill(row.begin(), row.end(), 0.0);
         row[1] = 1.0;
      }
   }
   auto dec = tabular_advantages(g, pi, 1, std::vector< int >{1, 1, 1}, DecisionOrder({2, 0, 1}));
   EXPECT_NEAR(dec.joint, 0.0, 1e-12);
   for(double a : dec.sequential) {
      EXPECT_NEAR(a, 0.0, 1e-12);
   }
}

TEST(Decomposition, LargeJointSpaceUnsupported) {
   TabularGame g;
   g.n_states = 1;
   g.action_counts = {11, 11, 11, 11};
   EXPECT_THROW(static_cast< void >(g.joint_count()), Unsupported);
}

TEST(TabularGame, ValidateRejectsBadRows) {
   Rng rng(3);
   auto g = TabularGame::random(rng, 2, 2, 2, 0.9);
   EXPECT_NO_THROW(g.validate());
   g.transition[0] += 0.5;
   EXPECT_THROW(g.validate(), InvalidArgument);
}

// ---- one-shot games: full enumeration of every policy table

double naive_optimum(const OneShotTeamGame& game, const DecisionOrder& order) {
   const int n = game.n_agents;
   std::vector< std::size_t > offset(static_cast< std::size_t >(n) + 1, 0);
   std::vector< std::size_t > prefixes(static_cast< std::size_t >(n), 1);
   for(int m = 0; m < n; ++m) {
      const auto agent = static_cast< std::size_t >(order[static_cast< std::size_t >(m)]);
      if(m > 0) {
         const auto prev = static_cast< std::size_t >(order[static_cast< std::size_t >(m - 1)]);
         prefixes[static_cast< std::size_t >(m)] = prefixes[static_cast< std::size_t >(m - 1)] * static_cast< std::size_t >(game.action_counts[prev]);
      }
      offset[static_cast< std::size_t >(m) + 1] = offset[static_cast< std::size_t >(m)] + static_cast< std::size_t >(game.signal_counts[agent]) * prefixes[static_cast< std::size_t >(m)];
   }
   const std::size_t entries = offset.back();
   std::vector< int > table(entries, 0);
   double best = -1e300;
   while(true) {
      double value = 0.0;
      for(std::size_t theta = 0; theta < game.type_probs.size(); ++theta) {
         std::vector< int > joint(static_cast< std::size_t >(n));
         std::size_t prefix = 0;
         for(int m = 0; m < n; ++m) {
            const auto agent = static_cast< std::size_t >(order[static_cast< std::size_t >(m)]);
            const auto sig = static_cast< std::size_t >(game.signal[agent][theta]);
            const int a = table[offset[static_cast< std::size_t >(m)] + sig * prefixes[static_cast< std::size_t >(m)] + prefix];
            joint[agent] = a;
            prefix = prefix * static_cast< std::size_t >(game.action_counts[agent]) + static_cast< std::size_t >(a);
         }
         value += game.type_probs[theta] * game.reward(static_cast< int >(theta), joint);
      }
      best = std::max(best, value);
      // odometer over table entries
      std::size_t e = 0;
      for(; e < entries; ++e) {
         int m = 0;
         while(offset[static_cast< std::size_t >(m) + 1] <= e) {
            ++m;
         }
         const int limit = game.action_counts[static_cast< std::size_t >(order[static_cast< std::size_t >(m)])];
         if(++table[e] < limit) {
            break;
         }
         table[e] = 0;
      }
      if(e == entries) {
         break;
      }
   }
   return best;
}

OneShotTeamGame informed_game(int n, int informed) {
   OneShotTeamGame g;
   g.n_agents = n;
   g.action_counts.assign(static_cast< std::size_t >(n), 2);
   g.type_probs = {0.5, 0.5};
   for(int i = 0; i < n; ++i) {
      g.signal_counts.push_back(i == informed ? 2 : 1);
      g.signal.push_back(i == informed ? std::vector< int >{0, 1} : std::vector< int >{0, 0});
   }
   g.reward = [n](int b, std::span< const int > a) {
      const auto m = std::count(a.begin(), a.end(), b);
      return static_cast< double >(m) / n + (m == n ? 1.0 : 0.0);
   };
   return g;
}

TEST(BruteForce, InformedGameHandValues) {
   // informed agent first: everyone copies it
   EXPECT_NEAR(brute_force_optimal_step(informed_game(2, 0), DecisionOrder({0, 1})), 2.0, 1e-12);
   // informed agent second: agent 0 guesses, .5 * 2 + .5 * 1/2
   EXPECT_NEAR(brute_force_optimal_step(informed_game(2, 1), DecisionOrder({0, 1})), 1.25, 1e-12);
   EXPECT_NEAR(naive_optimum(informed_game(2, 1), DecisionOrder({0, 1})), 1.25, 1e-12);
}

TEST(BruteForce, MatchesNaiveEnumeration) {
   for(int n = 1; n <= 3; ++n) {
      for(int k = 0; k < n; ++k) {
         std::vector< int > perm(static_cast< std::size_t >(n));
         std::iota(perm.begin(), perm.end(), 0);
         do {
            DecisionOrder ao(perm);
            EXPECT_NEAR(brute_force_optimal_step(informed_game(n, k), ao), naive_optimum(informed_game(n, k), ao), 1e-12);
         } while(std::next_permutation(perm.begin(), perm.end()));
      }
   }
}

TEST(BruteForce, RandomGamesMatchNaiveEnumeration) {
   Rng rng(77);
   for(int trial = 0; trial < 30; ++trial) {
      const int n = 2 + trial % 2;
      OneShotTeamGame g;
      g.n_agents = n;
      const int types = 3;
      double z = 0.0;
      for(int t = 0; t < types; ++t) {
         g.type_probs.push_back(0.1 + uniform01(rng));
         z += g.type_probs.back();
      }
      for(auto& p : g.type_probs) {
         p /= z;
      }
      for(int i = 0; i < n; ++i) {
         g.action_counts.push_back(n == 2 ? 3 : 2);
         g.signal_counts.push_back(2);
         std::vector< int > sig;
         for(int t = 0; t < types; ++t) {
            sig.push_back(static_cast< int >(uniform_index(rng, 2)));
         }
         g.signal.push_back(sig);
      }
      std::vector< double > table(static_cast< std::size_t >(types * 27));
      for(auto& v : table) {
         v = uniform(rng, -1.0, 1.0);
      }
      g.reward = [table, n](int theta, std::span< const int > a) {
         std::size_t idx = static_cast< std::size_t >(theta);
         for(int i = 0; i < n; ++i) {
            idx = idx * 3 + static_cast< std::size_t >(a[static_cast< std::size_t >(i)]);
         }
         return table[idx % table.size()];
      };
      std::vector< int > perm(static_cast< std::size_t >(n));
      std::iota(perm.begin(), perm.end(), 0);
      do {
         DecisionOrder ao(perm);
         EXPECT_NEAR(brute_force_optimal_step(g, ao), naive_optimum(g, ao), 1e-12);
      } while(std::next_permutation(perm.begin(), perm.end()));
   }
}

TEST(BruteForce, SingleAgentMaximizesExpectedReward) {
   OneShotTeamGame g;
   g.n_agents = 1;
   g.action_counts = {3};
   g.type_probs = {0.25, 0.75};
   g.signal_counts = {1};
   g.signal = {{0, 0}};
   const std::vector< std::vector< double > > r = {{1.0, 0.0, 0.5}, {0.0, 1.0, 0.6}};
   g.reward = [r](int t, std::span< const int > a) { return r[static_cast< std::size_t >(t)][static_cast< std::size_t >(a[0])]; };
   // E = .25 r0 + .75 r1 -> {.25, .75, .575}
   EXPECT_NEAR(brute_force_optimal_step(g, DecisionOrder::identity(1)), 0.75, 1e-12);
}

TEST(BruteForce, RejectsHugeSpacesAndBadGames) {
   EXPECT_THROW(brute_force_optimal_step(informed_game(4, 3), DecisionOrder::identity(4), 10.0), Unsupported);
   auto g = informed_game(2, 0);
   g.type_probs = {0.5, 0.6};
   EXPECT_THROW(brute_force_optimal_step(g, DecisionOrder::identity(2)), InvalidArgument);
   EXPECT_THROW(brute_force_optimal_step(informed_game(2, 0), DecisionOrder::identity(3)), InvalidArgument);
}

}  // namespace
}  // namespace ordermat
