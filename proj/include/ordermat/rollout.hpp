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

#ifndef ORDERMAT_ROLLOUT_HPP
#define ORDERMAT_ROLLOUT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ordermat/envs.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/order.hpp"
#include "ordermat/rng.hpp"

namespace ordermat {

/**
 * On-policy buffer of T steps from E environments run in lockstep. Row
 * s = t * E + e. Observations, actions and values are in canonical agent
 * order; log-probabilities are indexed by decision position.
 */
struct TrajectoryBatch {
   int steps = 0;  // T
   int n_envs = 0; // E
   int n_agents = 0;
   int obs_dim = 0;
   int action_width = 0;
   bool learned_order = false;

   std::vector< double > obs;                // [T*E, n, obs_dim]
   std::vector< double > actions;            // [T*E, n, width], unclamped
   std::vector< int > orders;                // [T*E, n]
   std::vector< double > rewards;            // [T*E]
   std::vector< std::uint8_t > dones;        // [T*E]
   std::vector< double > values;             // [T*E, n]
   std::vector< double > bootstrap_values;   // [E, n], after the last step
   std::vector< double > action_log_probs;   // [T*E, n] by decision position
   std::vector< double > agent_log_probs;    // [T*E, n-1]; entry m picks position m+1
   std::vector< double > order_entropy;      // [T*E], mean over the n-1 choices

   /// Returns of episodes that finished while collecting this batch.
   std::vector< double > episode_returns;

   [[nodiscard]] int rows() const { return steps * n_envs; }
   [[nodiscard]] DecisionOrder order(int row) const;
   /// values of the observation that follows each row: the next row of the
   /// same env, or the bootstrap for the last step. Rows with done = 1 still
   /// carry an entry; consumers mask it.
   [[nodiscard]] std::vector< double > next_values() const;
   /// Throws InvalidArgument when array sizes disagree with the dimensions.
   void validate() const;
};

void save_trajectory_batch(const std::filesystem::path& base, const TrajectoryBatch& batch);
TrajectoryBatch load_trajectory_batch(const std::filesystem::path& base);

/// One joint decision for each of E environments.
struct JointDecision {
   std::vector< DecisionOrder > orders;      // [E]
   std::vector< double > actions;            // [E, n, width], canonical, unclamped
   std::vector< double > values;             // [E, n]
   std::vector< double > action_log_probs;   // [E, n] by position
   std::vector< double > agent_log_probs;    // [E, n-1]
   std::vector< double > order_entropies;    // [E, n-1] masked entropy at each choice
};

/**
 * Encodes once in canonical order, then for m = 1..n decodes position m on
 * the representations swapped into the order built so far, draws the action
 * and (learned strategy) the next agent from the masked next-agent head.
 * fixed_orders[e] set means env e follows that order and no next-agent
 * choice is drawn.
 */
JointDecision decide(
   const TransformerActorCritic& net,
   const std::vector< JointObservation >& obs,
   const std::vector< std::optional< DecisionOrder > >& fixed_orders,
   int lead_agent,
   SelectMode action_mode,
   SelectMode order_mode,
   Rng& rng
);

/// Keeps E environment instances alive across collect() calls so episodes
/// continue from one training iteration to the next.
class RolloutWorker {
  public:
   RolloutWorker(const Env& env, OrderStrategy strategy, int lead_agent, int n_envs, std::uint64_t seed);

   TrajectoryBatch collect(const TransformerActorCritic& net, int steps);

   [[nodiscard]] int n_envs() const { return static_cast< int >(states_.size()); }

  private:
   const Env& env_;
   OrderStrategy strategy_;
   int lead_;
   Rng rng_;
   std::vector< OrderSchedule > schedules_;
   std::vector< EnvState > states_;
   std::vector< double > running_returns_;
};

/// Single-env convenience: fresh episode, T steps.
TrajectoryBatch collect(
   const Env& env,
   const TransformerActorCritic& net,
   const OrderStrategy& strategy,
   int lead_agent,
   int steps,
   std::uint64_t seed
);

struct EvalResult {
   double mean = 0.0;
   double median = 0.0;
   double q25 = 0.0;
   double q75 = 0.0;
   std::vector< double > returns;
   /// Mean masked next-agent entropy of every step, episode-major.
   std::vector< double > entropy_trace;
   /// Mean masked entropy of the choice made at positions 1..n-1.
   std::vector< double > position_entropy;
   double mean_entropy = 0.0;
};

/// Runs `episodes` episodes (in lockstep) with greedy selection by default.
EvalResult evaluate(
   const Env& env,
   const TransformerActorCritic& net,
   const OrderStrategy& strategy,
   int lead_agent,
   int episodes,
   std::uint64_t seed,
   SelectMode mode = SelectMode::greedy
);

/// Linear-interpolated quantile of unsorted values; q in [0, 1].
double quantile(std::vector< double > values, double q);

}  // namespace ordermat

#endif  // ORDERMAT_ROLLOUT_HPP
