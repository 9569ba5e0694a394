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

#include "ordermat/envs.hpp"

#include <algorithm>
#include <cmath>

#include "ordermat/errors.hpp"

namespace ordermat {

namespace {

std::vector< double > one_hot_id(int agent, int n, std::size_t extra) {
   std::vector< double > v(static_cast< std::size_t >(n) + extra, 0.0);
   v[static_cast< std::size_t >(agent)] = 1.0;
   return v;
}

void check_common(int n_agents, int episode_length) {
   if(n_agents < 1) {
      throw InvalidArgument("env: n_agents must be >= 1");
   }
   if(episode_length < 1) {
      throw InvalidArgument("env: episode_length must be >= 1");
   }
}

}  // namespace

// ---------------------------------------------------------------- informed_leader

InformedLeader::InformedLeader(int n_agents, int informed_agent, int episode_length) : informed_(informed_agent) {
   check_common(n_agents, episode_length);
   if(informed_agent < 0 || informed_agent >= n_agents) {
      throw InvalidArgument("informed_leader: informed_agent out of range");
   }
   spec_.name = "informed_leader";
   spec_.n_agents = n_agents;
   spec_.obs_dim = n_agents + 2;
   spec_.action_space = ActionSpace::discrete(2);
   spec_.episode_length = episode_length;
   spec_.reward_low = 0.0;
   spec_.reward_high = 2.0;
}

EnvState InformedLeader::reset(Rng& rng) const {
   EnvState s;
   s.hidden = {uniform01(rng) < 0.5 ? 0.0 : 1.0};
   return s;
}

JointObservation InformedLeader::observe(const EnvState& state) const {
   JointObservation obs;
   for(int i = 0; i < spec_.n_agents; ++i) {
      auto o = one_hot_id(i, spec_.n_agents, 2);
      if(i == informed_) {
         o[static_cast< std::size_t >(spec_.n_agents)] = 1.0;
         o[static_cast< std::size_t >(spec_.n_agents) + 1] = state.hidden.at(0);
      }
      obs.push_back(std::move(o));
   }
   return obs;
}

double InformedLeader::reward(int b, std::span< const int > actions) const {
   int matches = 0;
   for(int a : actions) {
      matches += a == b ? 1 : 0;
   }
   const int n = spec_.n_agents;
   return static_cast< double >(matches) / n + (matches == n ? 1.0 : 0.0);
}

StepResult InformedLeader::step(const EnvState& state, std::span< const double > joint_action, Rng& rng) const {
   if(joint_action.size() != static_cast< std::size_t >(spec_.n_agents)) {
      throw InvalidArgument("informed_leader: expected one action per agent");
   }
   if(state.t >= spec_.episode_length) {
      throw InvalidState("informed_leader: step after episode end");
   }
   std::vector< int > acts;
   for(double a : joint_action) {
      if(a != 0.0 && a != 1.0) {
         throw InvalidArgument("informed_leader: action must be 0 or 1, got " + std::to_string(a));
      }
      acts.push_back(static_cast< int >(a));
   }
   StepResult r;
   r.reward = reward(static_cast< int >(state.hidden.at(0)), acts);
   r.next.t = state.t + 1;
   r.next.hidden = {uniform01(rng) < 0.5 ? 0.0 : 1.0};
   r.done = r.next.t >= spec_.episode_length;
   r.obs = observe(r.next);
   return r;
}

std::optional< OneShotTeamGame > InformedLeader::one_shot_game() const {
   OneShotTeamGame g;
   g.n_agents = spec_.n_agents;
   g.action_counts.assign(static_cast< std::size_t >(g.n_agents), 2);
   g.type_probs = {0.5, 0.5};
   for(int i = 0; i < g.n_agents; ++i) {
      if(i == informed_) {
         g.signal_counts.push_back(2);
         g.signal.push_back({0, 1});
      } else {
         g.signal_counts.push_back(1);
         g.signal.push_back({0, 0});
      }
   }
   g.reward = [this](int theta, std::span< const int > joint) { return reward(theta, joint); };
   return g;
}

// ---------------------------------------------------------------- chain_spread

ChainSpread::ChainSpread(int n_agents, double coupling, int episode_length) : coupling_(coupling) {
   check_common(n_agents, episode_length);
   if(! (std::abs(coupling) <= 1.0)) {
      throw InvalidArgument("chain_spread: |coupling| must be <= 1 so targets stay in bounds");
   }
   spec_.name = "chain_spread";
   spec_.n_agents = n_agents;
   spec_.obs_dim = n_agents + 2;
   spec_.action_space = ActionSpace::continuous(1, -1.0, 1.0);
   spec_.episode_length = episode_length;
   spec_.reward_low = -4.0 * n_agents;
   spec_.reward_high = 0.0;
}

EnvState ChainSpread::reset(Rng& rng) const {
   EnvState s;
   s.hidden = {uniform(rng, -1.0, 1.0)};
   return s;
}

JointObservation ChainSpread::observe(const EnvState& state) const {
   JointObservation obs;
   for(int i = 0; i < spec_.n_agents; ++i) {
      auto o = one_hot_id(i, spec_.n_agents, 2);
      if(i == 0) {
         o[static_cast< std::size_t >(spec_.n_agents)] = state.hidden.at(0);
         o[static_cast< std::size_t >(spec_.n_agents) + 1] = 1.0;
      }
      obs.push_back(std::move(o));
   }
   return obs;
}

double ChainSpread::reward(double goal, std::span< const double > actions) const {
   double total = 0.0;
   double target = goal;
   for(double a : actions) {
      total += (a - target) * (a - target);
      target = coupling_ * a;
   }
   return -total;
}

StepResult ChainSpread::step(const EnvState& state, std::span< const double > joint_action, Rng& rng) const {
   if(joint_action.size() != static_cast< std::size_t >(spec_.n_agents)) {
      throw InvalidArgument("chain_spread: expected one action per agent");
   }
   if(state.t >= spec_.episode_length) {
      throw InvalidState("chain_spread: step after episode end");
   }
   StepResult r;
   std::vector< double > acts;
   for(double a : joint_action) {
      if(! std::isfinite(a)) {
         throw InvalidArgument("chain_spread: non-finite action");
      }
      const double c = std::clamp(a, spec_.action_space.low, spec_.action_space.high);
      r.clamped = r.clamped || c != a;
      acts.push_back(c);
   }
   r.reward = reward(state.hidden.at(0), acts);
   r.next.t = state.t + 1;
   r.next.hidden = {uniform(rng, -1.0, 1.0)};
   r.done = r.next.t >= spec_.episode_length;
   r.obs = observe(r.next);
   return r;
}

// ---------------------------------------------------------------- factory

std::unique_ptr< Env > make_env(const std::string& name, const nlohmann::json& params) {
   const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
   try {
      if(name == "informed_leader") {
         const int n = p.value("n_agents", 4);
         return std::make_unique< InformedLeader >(n, p.value("informed_agent", n - 1), p.value("episode_length", 8));
      }
      if(name == "chain_spread") {
         return std::make_unique< ChainSpread >(
            p.value("n_agents", 4), p.value("coupling", 0.8), p.value("episode_length", 1)
         );
      }
   } catch(const nlohmann::json::exception& e) {
      throw InvalidArgument("env params for " + name + ": " + e.what());
   }
   throw InvalidArgument("unknown env: " + name);
}

double brute_force_optimal(const Env& env, const DecisionOrder& order) {
   auto game = env.one_shot_game();
   if(! game) {
      throw Unsupported("brute force: " + env.spec().name + " has no enumerable one-shot form");
   }
   return brute_force_optimal_step(*game, order) * env.spec().episode_length;
}

}  // namespace ordermat
