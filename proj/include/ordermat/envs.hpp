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

#ifndef ORDERMAT_ENVS_HPP
#define ORDERMAT_ENVS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/oracle.hpp"
#include "ordermat/order.hpp"
#include "ordermat/rng.hpp"

namespace ordermat {

struct EnvSpec {
   std::string name;
   int n_agents = 1;
   int obs_dim = 1;
   ActionSpace action_space;
   int episode_length = 1;
   double reward_low = 0.0;
   double reward_high = 0.0;
};

/// Everything an environment needs to continue an episode.
struct EnvState {
   int t = 0;
   std::vector< double > hidden;
};

struct StepResult {
   EnvState next;
   JointObservation obs;  // observation of `next`
   double reward = 0.0;
   bool done = false;
   bool clamped = false;  // some continuous action was outside the bounds
};

/**
 * Cooperative game with one shared reward per step. Implementations hold
 * only immutable parameters; the episode lives in EnvState and the
 * randomness in the caller's Rng, so step() is a pure function of
 * (state, joint action, rng).
 *
 * Joint actions are flat, canonical agent order, `width()` values per agent.
 */
class Env {
  public:
   virtual ~Env() = default;

   [[nodiscard]] virtual const EnvSpec& spec() const = 0;
   virtual EnvState reset(Rng& rng) const = 0;
   [[nodiscard]] virtual JointObservation observe(const EnvState& state) const = 0;
   virtual StepResult step(const EnvState& state, std::span< const double > joint_action, Rng& rng) const = 0;

   /// The per-step decision problem when every step is an independent
   /// one-shot game; nullopt otherwise.
   [[nodiscard]] virtual std::optional< OneShotTeamGame > one_shot_game() const { return std::nullopt; }
};

/**
 * A hidden bit b is drawn every step. Only agent `informed_agent` sees it.
 * Each agent picks 0 or 1; reward = (#agents whose action equals b) / n,
 * plus 1 when every agent matched.
 *
 * Observation: one-hot agent id, informed flag, b (0 for uninformed agents).
 */
class InformedLeader final : public Env {
  public:
   InformedLeader(int n_agents, int informed_agent, int episode_length);

   [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
   EnvState reset(Rng& rng) const override;
   [[nodiscard]] JointObservation observe(const EnvState& state) const override;
   StepResult step(const EnvState& state, std::span< const double > joint_action, Rng& rng) const override;
   [[nodiscard]] std::optional< OneShotTeamGame > one_shot_game() const override;

   [[nodiscard]] int informed_agent() const { return informed_; }
   /// Reward for bit b and canonical binary actions.
   [[nodiscard]] double reward(int b, std::span< const int > actions) const;

  private:
   EnvSpec spec_;
   int informed_;
};

/**
 * Agent k should output t_k, where t_0 = goal ~ U[-1, 1] (seen only by agent
 * 0) and t_k = c * a_{k-1} for k >= 1. Reward = -sum_k (a_k - t_k)^2 on
 * clamped actions.
 *
 * Observation: one-hot agent id, goal (agent 0 only), source flag.
 */
class ChainSpread final : public Env {
  public:
   ChainSpread(int n_agents, double coupling, int episode_length);

   [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
   EnvState reset(Rng& rng) const override;
   [[nodiscard]] JointObservation observe(const EnvState& state) const override;
   StepResult step(const EnvState& state, std::span< const double > joint_action, Rng& rng) const override;

   [[nodiscard]] double coupling() const { return coupling_; }
   /// Reward for a goal and (already clamped) canonical actions.
   [[nodiscard]] double reward(double goal, std::span< const double > actions) const;

  private:
   EnvSpec spec_;
   double coupling_;
};

/// Known names: "informed_leader" {n_agents, informed_agent, episode_length}
/// and "chain_spread" {n_agents, coupling, episode_length}.
std::unique_ptr< Env > make_env(const std::string& name, const nlohmann::json& params);

/// Best expected episode return over deterministic policies in which the
/// agent at each position sees its own observation and its predecessors'
/// actions. Throws Unsupported for envs without a one-shot form.
double brute_force_optimal(const Env& env, const DecisionOrder& order);

}  // namespace ordermat

#endif  // ORDERMAT_ENVS_HPP
