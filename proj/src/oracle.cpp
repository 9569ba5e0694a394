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

#include "ordermat/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ordermat/errors.hpp"

namespace ordermat {

void OneShotTeamGame::validate() const {
   const auto n = static_cast< std::size_t >(n_agents);
   if(n_agents < 1 || action_counts.size() != n || signal_counts.size() != n || signal.size() != n) {
      throw InvalidArgument("one-shot game: per-agent tables must have n entries");
   }
   if(type_probs.empty() || ! reward) {
      throw InvalidArgument("one-shot game: needs types and a reward function");
   }
   double total = 0.0;
   for(double p : type_probs) {
      if(p < 0.0) {
         throw InvalidArgument("one-shot game: negative type probability");
      }
      total += p;
   }
   if(std::abs(total - 1.0) > 1e-9) {
      throw InvalidArgument("one-shot game: type probabilities do not sum to 1");
   }
   for(std::size_t i = 0; i < n; ++i) {
      if(action_counts[i] < 1 || signal_counts[i] < 1 || signal[i].size() != type_probs.size()) {
         throw InvalidArgument("one-shot game: malformed tables for agent " + std::to_string(i));
      }
      for(int s : signal[i]) {
         if(s < 0 || s >= signal_counts[i]) {
            throw InvalidArgument("one-shot game: signal out of range");
         }
      }
   }
}

double brute_force_optimal_step(const OneShotTeamGame& game, const DecisionOrder& order, double max_policies) {
   game.validate();
   const int n = game.n_agents;
   if(order.size() != n) {
      throw InvalidArgument("brute force: order length differs from agent count");
   }
   const auto n_types = game.type_probs.size();

   // table_size[m] = signals of the agent at m times the number of prefixes.
   std::vector< std::size_t > table_size(static_cast< std::size_t >(n));
   std::size_t prefixes = 1;
   double log_policies = 0.0;
   for(int m = 0; m < n; ++m) {
      const auto agent = static_cast< std::size_t >(order[static_cast< std::size_t >(m)]);
      table_size[static_cast< std::size_t >(m)] = static_cast< std::size_t >(game.signal_counts[agent]) * prefixes;
      if(m < n - 1) {
         log_policies += static_cast< double >(table_size[static_cast< std::size_t >(m)])
                         * std::log(static_cast< double >(game.action_counts[agent]));
      }
      prefixes *= static_cast< std::size_t >(game.action_counts[agent]);
   }
   if(log_policies > std::log(max_policies)) {
      throw Unsupported("brute force: policy space too large to enumerate");
   }

   std::vector< std::vector< int > > tables(static_cast< std::size_t >(n > 0 ? n - 1 : 0));
   for(int m = 0; m + 1 < n; ++m) {
      tables[static_cast< std::size_t >(m)].assign(table_size[static_cast< std::size_t >(m)], 0);
   }

   const int last_agent = order[static_cast< std::size_t >(n - 1)];
   const int last_actions = game.action_counts[static_cast< std::size_t >(last_agent)];
   std::vector< int > joint(static_cast< std::size_t >(n));

   auto evaluate = [&]() {
      // (last agent's signal, prefix index) -> expected reward per last action
      std::map< std::pair< int, std::size_t >, std::vector< double > > groups;
      for(std::size_t theta = 0; theta < n_types; ++theta) {
         std::size_t prefix = 0;
         for(int m = 0; m + 1 < n; ++m) {
            const auto agent = static_cast< std::size_t >(order[static_cast< std::size_t >(m)]);
            const auto sig = static_cast< std::size_t >(game.signal[agent][theta]);
            const auto per_signal = table_size[static_cast< std::size_t >(m)] / static_cast< std::size_t >(game.signal_counts[agent]);
            const int a = tables[static_cast< std::size_t >(m)][sig * per_signal + prefix];
            joint[agent] = a;
            prefix = prefix * static_cast< std::size_t >(game.action_counts[agent]) + static_cast< std::size_t >(a);
         }
         const int sig_last = game.signal[static_cast< std::size_t >(last_agent)][theta];
         auto& acc = groups[{sig_last, prefix}];
         acc.resize(static_cast< std::size_t >(last_actions), 0.0);
         for(int a = 0; a < last_actions; ++a) {
            joint[static_cast< std::size_t >(last_agent)] = a;
            acc[static_cast< std::size_t >(a)] += game.type_probs[theta] * game.reward(static_cast< int >(theta), joint);
         }
      }
      double total = 0.0;
      for(const auto& [_, acc] : groups) {
         total += *std::max_element(acc.begin(), acc.end());
      }
      return total;
   };

   double best = -std::numeric_limits< double >::infinity();
   // Odometer over the concatenation of all tables for positions 0..n-2.
   while(true) {
      best = std::max(best, evaluate());
      int m = 0;
      std::size_t e = 0;
      bool carried = true;
      while(carried && m + 1 < n) {
         auto& table = tables[static_cast< std::size_t >(m)];
         const int limit = game.action_counts[static_cast< std::size_t >(order[static_cast< std::size_t >(m)])];
         if(++table[e] < limit) {
            carried = false;
            break;
         }
         table[e] = 0;
         if(++e == table.size()) {
            e = 0;
            ++m;
         }
      }
      if(carried) {
         break;
      }
   }
   return best;
}

int TabularGame::joint_count() const {
   long total = 1;
   for(int a : action_counts) {
      total *= a;
      if(total > 10000) {
         throw Unsupported("tabular game: more than 1e4 joint actions");
      }
   }
   return static_cast< int >(total);
}

int TabularGame::joint_index(std::span< const int > joint_action) const {
   if(joint_action.size() != action_counts.size()) {
      throw InvalidArgument("tabular game: joint action has the wrong length");
   }
   int idx = 0;
   for(std::size_t i = 0; i < action_counts.size(); ++i) {
      if(joint_action[i] < 0 || joint_action[i] >= action_counts[i]) {
         throw InvalidArgument("tabular game: action out of range");
      }
      idx = idx * action_counts[i] + joint_action[i];
   }
   return idx;
}

std::vector< int > TabularGame::joint_action(int index) const {
   std::vector< int > out(action_counts.size());
   for(std::size_t i = action_counts.size(); i-- > 0;) {
      out[i] = index % action_counts[i];
      index /= action_counts[i];
   }
   return out;
}

void TabularGame::validate() const {
   if(n_states < 1 || action_counts.empty()) {
      throw InvalidArgument("tabular game: needs states and agents");
   }
   if(! (gamma >= 0.0 && gamma < 1.0)) {
      throw InvalidArgument("tabular game: gamma must lie in [0, 1)");
   }
   const auto s = static_cast< std::size_t >(n_states);
   const auto j = static_cast< std::size_t >(joint_count());
   if(reward.size() != s * j || transition.size() != s * j * s) {
      throw InvalidArgument("tabular game: reward or transition table has the wrong size");
   }
   for(std::size_t row = 0; row < s * j; ++row) {
      double total = 0.0;
      for(std::size_t k = 0; k < s; ++k) {
         total += transition[row * s + k];
      }
      if(std::abs(total - 1.0) > 1e-9) {
         throw InvalidArgument("tabular game: transition row does not sum to 1");
      }
   }
}

namespace {

std::vector< double > random_simplex(Rng& rng, std::size_t k) {
   std::vector< double > p(k);
   double total = 0.0;
   for(auto& v : p) {
      v = 0.05 + uniform01(rng);
      total += v;
   }
   for(auto& v : p) {
      v /= total;
   }
   return p;
}

}  // namespace

TabularGame TabularGame::random(Rng& rng, int n_agents, int n_states, int max_actions, double gamma) {
   TabularGame g;
   g.n_states = n_states;
   g.gamma = gamma;
   for(int i = 0; i < n_agents; ++i) {
      g.action_counts.push_back(2 + static_cast< int >(uniform_index(rng, static_cast< std::size_t >(std::max(1, max_actions - 1)))));
   }
   const auto s = static_cast< std::size_t >(n_states);
   const auto j = static_cast< std::size_t >(g.joint_count());
   g.reward.resize(s * j);
   for(auto& r : g.reward) {
      r = uniform(rng, -1.0, 1.0);
   }
   for(std::size_t row = 0; row < s * j; ++row) {
      auto p = random_simplex(rng, s);
      g.transition.insert(g.transition.end(), p.begin(), p.end());
   }
   g.validate();
   return g;
}

double ProductPolicy::joint_prob(int state, std::span< const int > joint_action) const {
   double p = 1.0;
   for(std::size_t i = 0; i < joint_action.size(); ++i) {
      p *= probs[i][static_cast< std::size_t >(state)][static_cast< std::size_t >(joint_action[i])];
   }
   return p;
}

ProductPolicy ProductPolicy::random(Rng& rng, const TabularGame& game) {
   ProductPolicy pol;
   for(int a : game.action_counts) {
      std::vector< std::vector< double > > per_state;
      for(int s = 0; s < game.n_states; ++s) {
         per_state.push_back(random_simplex(rng, static_cast< std::size_t >(a)));
      }
      pol.probs.push_back(std::move(per_state));
   }
   return pol;
}

ProductPolicy ProductPolicy::uniform(const TabularGame& game) {
   ProductPolicy pol;
   for(int a : game.action_counts) {
      pol.probs.emplace_back(
         static_cast< std::size_t >(game.n_states), std::vector< double >(static_cast< std::size_t >(a), 1.0 / a)
      );
   }
   return pol;
}

TabularEvaluation::TabularEvaluation(const TabularGame& game, const ProductPolicy& policy)
    : game_(game), policy_(policy) {
   game.validate();
   if(policy.probs.size() != game.action_counts.size()) {
      throw InvalidArgument("tabular evaluation: policy agent count differs from the game");
   }
   const auto s = static_cast< std::size_t >(game.n_states);
   const auto j = static_cast< std::size_t >(game.joint_count());
   Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast< Eigen::Index >(s), static_cast< Eigen::Index >(s));
   Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast< Eigen::Index >(s));
   for(std::size_t st = 0; st < s; ++st) {
      for(std::size_t ja = 0; ja < j; ++ja) {
         const auto joint = game.joint_action(static_cast< int >(ja));
         const double p = policy.joint_prob(static_cast< int >(st), joint);
         r(static_cast< Eigen::Index >(st)) += p * game.reward[st * j + ja];
         for(std::size_t nx = 0; nx < s; ++nx) {
            a(static_cast< Eigen::Index >(st), static_cast< Eigen::Index >(nx)) -=
               game.gamma * p * game.transition[(st * j + ja) * s + nx];
         }
      }
   }
   Eigen::VectorXd v = a.fullPivLu().solve(r);
   v_.assign(v.data(), v.data() + v.size());
   q_.resize(s * j);
   for(std::size_t st = 0; st < s; ++st) {
      for(std::size_t ja = 0; ja < j; ++ja) {
         double next = 0.0;
         for(std::size_t nx = 0; nx < s; ++nx) {
            next += game.transition[(st * j + ja) * s + nx] * v_[nx];
         }
         q_[st * j + ja] = game.reward[st * j + ja] + game.gamma * next;
      }
   }
}

double TabularEvaluation::q(int state, std::span< const int > joint_action) const {
   const auto j = static_cast< std::size_t >(game_.joint_count());
   return q_[static_cast< std::size_t >(state) * j + static_cast< std::size_t >(game_.joint_index(joint_action))];
}

double TabularEvaluation::partial_q(int state, std::span< const int > agents, std::span< const int > actions) const {
   if(agents.size() != actions.size()) {
      throw InvalidArgument("partial_q: agents and actions differ in length");
   }
   const int j = game_.joint_count();
   double total = 0.0;
   for(int ja = 0; ja < j; ++ja) {
      const auto joint = game_.joint_action(ja);
      bool consistent = true;
      for(std::size_t k = 0; k < agents.size() && consistent; ++k) {
         consistent = joint[static_cast< std::size_t >(agents[k])] == actions[k];
      }
      if(! consistent) {
         continue;
      }
      // Probability of the free agents' actions only.
      double p = 1.0;
      for(std::size_t i = 0; i < joint.size(); ++i) {
         if(std::find(agents.begin(), agents.end(), static_cast< int >(i)) == agents.end()) {
            p *= policy_.probs[i][static_cast< std::size_t >(state)][static_cast< std::size_t >(joint[i])];
         }
      }
      total += p * q(state, joint);
   }
   return total;
}

AdvantageDecomposition tabular_advantages(
   const TabularGame& game,
   const ProductPolicy& policy,
   int state,
   std::span< const int > joint_action,
   const DecisionOrder& order
) {
   static_cast< void >(game.joint_count());  // throws Unsupported when too large
   if(order.size() != game.n_agents() || joint_action.size() != game.action_counts.size()) {
      throw InvalidArgument("tabular advantages: order or joint action length differs from agent count");
   }
   if(state < 0 || state >= game.n_states) {
      throw InvalidArgument("tabular advantages: state out of range");
   }
   const TabularEvaluation eval(game, policy);
   AdvantageDecomposition out;
   out.joint = eval.q(state, joint_action) - eval.value(state);
   std::vector< int > agents;
   std::vector< int > actions;
   double prev = eval.partial_q(state, agents, actions);
   for(int m = 0; m < order.size(); ++m) {
      const int agent = order[static_cast< std::size_t >(m)];
      agents.push_back(agent);
      actions.push_back(joint_action[static_cast< std::size_t >(agent)]);
      const double cur = eval.partial_q(state, agents, actions);
      out.sequential.push_back(cur - prev);
      prev = cur;
   }
   return out;
}

}  // namespace ordermat
