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

#ifndef ORDERMAT_ORACLE_HPP
#define ORDERMAT_ORACLE_HPP

#include <functional>
#include <span>
#include <vector>

#include "ordermat/order.hpp"
#include "ordermat/rng.hpp"

namespace ordermat {

/**
 * Bayesian team game played once: nature draws a type theta with
 * probability type_probs[theta], agent i privately observes
 * signal[i][theta] in [0, signal_counts[i]) and every agent shares
 * reward(theta, joint_action).
 */
struct OneShotTeamGame {
   int n_agents = 0;
   std::vector< int > action_counts;
   std::vector< double > type_probs;
   std::vector< int > signal_counts;
   std::vector< std::vector< int > > signal;  // [agent][theta]
   std::function< double(int theta, std::span< const int > joint_action) > reward;

   void validate() const;
};

/// Exact optimum over deterministic policies where the agent at position m
/// of `order` maps (own signal, actions of positions 0..m-1) to an action.
/// Throws Unsupported when the policy space exceeds `max_policies`.
double brute_force_optimal_step(const OneShotTeamGame& game, const DecisionOrder& order, double max_policies = 5e7);

/// Finite Markov game with a shared reward. Joint actions are flattened with
/// agent 0 as the most significant digit.
struct TabularGame {
   int n_states = 1;
   std::vector< int > action_counts;
   double gamma = 0.9;
   std::vector< double > reward;      // [S * J]
   std::vector< double > transition;  // [S * J * S], rows sum to 1

   [[nodiscard]] int n_agents() const { return static_cast< int >(action_counts.size()); }
   [[nodiscard]] int joint_count() const;
   [[nodiscard]] int joint_index(std::span< const int > joint_action) const;
   [[nodiscard]] std::vector< int > joint_action(int index) const;
   void validate() const;

   static TabularGame random(Rng& rng, int n_agents, int n_states, int max_actions, double gamma);
};

/// Independent per-agent stochastic policies: probs[agent][state][action].
struct ProductPolicy {
   std::vector< std::vector< std::vector< double > > > probs;

   [[nodiscard]] double joint_prob(int state, std::span< const int > joint_action) const;
   static ProductPolicy random(Rng& rng, const TabularGame& game);
   static ProductPolicy uniform(const TabularGame& game);
};

/// Exact policy evaluation by a dense linear solve.
class TabularEvaluation {
  public:
   TabularEvaluation(const TabularGame& game, const ProductPolicy& policy);

   [[nodiscard]] double value(int state) const { return v_[static_cast< std::size_t >(state)]; }
   [[nodiscard]] double q(int state, std::span< const int > joint_action) const;
   /// Expected Q when `agents` play `actions` and everyone else follows the
   /// policy. Empty `agents` gives V(state).
   [[nodiscard]] double partial_q(int state, std::span< const int > agents, std::span< const int > actions) const;

  private:
   const TabularGame& game_;
   const ProductPolicy& policy_;
   std::vector< double > v_;
   std::vector< double > q_;  // [S * J]
};

struct AdvantageDecomposition {
   double joint = 0.0;
   /// sequential[m] = A^{i_{1:m}}(s, a^{i_{1:m-1}}, a^{i_m}) for the agent at
   /// decision position m.
   std::vector< double > sequential;
};

/// Joint and sequential advantages of `joint_action` (canonical order) in
/// `state` along `order`. Throws Unsupported beyond 1e4 joint actions.
AdvantageDecomposition tabular_advantages(
   const TabularGame& game,
   const ProductPolicy& policy,
   int state,
   std::span< const int > joint_action,
   const DecisionOrder& order
);

}  // namespace ordermat

#endif  // ORDERMAT_ORACLE_HPP
