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

#include "ordermat/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ordermat/errors.hpp"
#include "ordermat/tensor_io.hpp"

namespace ordermat {

namespace {

std::size_t sz(int v) { return static_cast< std::size_t >(v); }

Tensor stack_observations(const std::vector< JointObservation >& obs, int n, int obs_dim) {
   std::vector< double > flat;
   flat.reserve(obs.size() * sz(n) * sz(obs_dim));
   for(const auto& joint : obs) {
      if(joint.size() != sz(n)) {
         throw InvalidArgument("observation count differs from n_agents");
      }
      for(const auto& o : joint) {
         if(o.size() != sz(obs_dim)) {
            throw InvalidArgument("observation width differs from obs_dim");
         }
         flat.insert(flat.end(), o.begin(), o.end());
      }
   }
   return Tensor(Shape{obs.size(), sz(n), sz(obs_dim)}, std::move(flat));
}

struct SampledAction {
   std::vector< double > value;
   double log_prob = 0.0;
};

SampledAction sample_discrete(std::span< const double > logits, SelectMode mode, Rng& rng) {
   const double mx = *std::max_element(logits.begin(), logits.end());
   double z = 0.0;
   for(double l : logits) {
      z += std::exp(l - mx);
   }
   const double lse = mx + std::log(z);
   std::size_t pick = 0;
   if(mode == SelectMode::greedy) {
      for(std::size_t k = 1; k < logits.size(); ++k) {
         if(logits[k] > logits[pick]) {
            pick = k;
         }
      }
   } else {
      const double u = uniform01(rng);
      double acc = 0.0;
      for(std::size_t k = 0; k < logits.size(); ++k) {
         pick = k;
         acc += std::exp(logits[k] - lse);
         if(u < acc) {
            break;
         }
      }
   }
   return {{static_cast< double >(pick)}, logits[pick] - lse};
}

SampledAction sample_gaussian(std::span< const double > mean, std::span< const double > log_std, SelectMode mode, Rng& rng) {
   SampledAction out;
   const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
   for(std::size_t k = 0; k < mean.size(); ++k) {
      const double sd = std::exp(log_std[k]);
      const double x = mode == SelectMode::greedy ? mean[k] : mean[k] + sd * standard_normal(rng);
      const double z = (x - mean[k]) * std::exp(-log_std[k]);
      out.log_prob += -0.5 * z * z - log_std[k] - half_log_2pi;
      out.value.push_back(x);
   }
   return out;
}

}  // namespace

// ---------------------------------------------------------------- batch

DecisionOrder TrajectoryBatch::order(int row) const {
   auto first = orders.begin() + static_cast< std::ptrdiff_t >(sz(row) * sz(n_agents));
   return DecisionOrder(std::vector< int >(first, first + n_agents));
}

std::vector< double > TrajectoryBatch::next_values() const {
   const auto n = sz(n_agents);
   std::vector< double > out(values.size());
   for(int t = 0; t < steps; ++t) {
      for(int e = 0; e < n_envs; ++e) {
         const auto row = sz(t * n_envs + e);
         const double* src = t + 1 < steps ? &values[sz((t + 1) * n_envs + e) * n] : &bootstrap_values[sz(e) * n];
         std::copy_n(src, n, out.begin() + static_cast< std::ptrdiff_t >(row * n));
      }
   }
   return out;
}

void TrajectoryBatch::validate() const {
   const auto r = sz(rows());
   const auto n = sz(n_agents);
   const bool ok = obs.size() == r * n * sz(obs_dim) && actions.size() == r * n * sz(action_width)
                   && orders.size() == r * n && rewards.size() == r && dones.size() == r && values.size() == r * n
                   && bootstrap_values.size() == sz(n_envs) * n && action_log_probs.size() == r * n
                   && agent_log_probs.size() == r * (n > 0 ? n - 1 : 0) && order_entropy.size() == r;
   if(! ok) {
      throw InvalidArgument("trajectory batch: array sizes disagree with its dimensions");
   }
}

void save_trajectory_batch(const std::filesystem::path& base, const TrajectoryBatch& b) {
   b.validate();
   const auto r = sz(b.rows());
   const auto n = sz(b.n_agents);
   auto as_double = [](const auto& v) { return std::vector< double >(v.begin(), v.end()); };
   std::vector< NamedArray > arrays = {
      {"obs", Shape{r, n, sz(b.obs_dim)}, b.obs},
      {"actions", Shape{r, n, sz(b.action_width)}, b.actions},
      {"orders", Shape{r, n}, as_double(b.orders)},
      {"rewards", Shape{r}, b.rewards},
      {"dones", Shape{r}, as_double(b.dones)},
      {"values", Shape{r, n}, b.values},
      {"bootstrap_values", Shape{sz(b.n_envs), n}, b.bootstrap_values},
      {"action_log_probs", Shape{r, n}, b.action_log_probs},
      {"agent_log_probs", Shape{r, n > 0 ? n - 1 : 0}, b.agent_log_probs},
      {"order_entropy", Shape{r}, b.order_entropy},
      {"episode_returns", Shape{b.episode_returns.size()}, b.episode_returns},
   };
   nlohmann::json meta = {
      {"kind", "trajectory_batch"},
      {"steps", b.steps},
      {"n_envs", b.n_envs},
      {"n_agents", b.n_agents},
      {"obs_dim", b.obs_dim},
      {"action_width", b.action_width},
      {"learned_order", b.learned_order},
   };
   write_named_arrays(base, std::move(arrays), meta);
}

TrajectoryBatch load_trajectory_batch(const std::filesystem::path& base) {
   auto file = read_named_arrays(base);
   if(file.meta.value("kind", std::string()) != "trajectory_batch") {
      throw IoError("not a trajectory batch: " + base.string());
   }
   TrajectoryBatch b;
   b.steps = file.meta.at("steps").get< int >();
   b.n_envs = file.meta.at("n_envs").get< int >();
   b.n_agents = file.meta.at("n_agents").get< int >();
   b.obs_dim = file.meta.at("obs_dim").get< int >();
   b.action_width = file.meta.at("action_width").get< int >();
   b.learned_order = file.meta.at("learned_order").get< bool >();
   for(auto& a : file.arrays) {
      if(a.name == "obs") {
         b.obs = std::move(a.data);
      } else if(a.name == "actions") {
         b.actions = std::move(a.data);
      } else if(a.name == "orders") {
         b.orders.assign(a.data.begin(), a.data.end());
      } else if(a.name == "rewards") {
         b.rewards = std::move(a.data);
      } else if(a.name == "dones") {
         b.dones.assign(a.data.begin(), a.data.end());
      } else if(a.name == "values") {
         b.values = std::move(a.data);
      } else if(a.name == "bootstrap_values") {
         b.bootstrap_values = std::move(a.data);
      } else if(a.name == "action_log_probs") {
         b.action_log_probs = std::move(a.data);
      } else if(a.name == "agent_log_probs") {
         b.agent_log_probs = std::move(a.data);
      } else if(a.name == "order_entropy") {
         b.order_entropy = std::move(a.data);
      } else if(a.name == "episode_returns") {
         b.episode_returns = std::move(a.data);
      }
   }
   b.validate();
   return b;
}

// ---------------------------------------------------------------- decide

JointDecision decide(
   const TransformerActorCritic& net,
   const std::vector< JointObservation >& obs,
   const std::vector< std::optional< DecisionOrder > >& fixed_orders,
   int lead_agent,
   SelectMode action_mode,
   SelectMode order_mode,
   Rng& rng
) {
   const auto& cfg = net.config();
   const int n = cfg.n_agents;
   const auto E = obs.size();
   const auto width = sz(cfg.action_space.width());
   const auto head = sz(cfg.action_space.head_size());
   const bool discrete = cfg.action_space.kind == ActionKind::discrete;
   if(fixed_orders.size() != E) {
      throw InvalidArgument("decide: one order slot per environment required");
   }
   if(lead_agent < 0 || lead_agent >= n) {
      throw InvalidArgument("decide: lead agent out of range");
   }
   for(const auto& fo : fixed_orders) {
      if(fo && fo->size() != n) {
         throw InvalidArgument("decide: fixed order length differs from n_agents");
      }
   }

   NoGradGuard no_grad;
   const EncoderOutput enc = net.encode(stack_observations(obs, n, cfg.obs_dim));

   JointDecision out;
   out.values.assign(enc.values.data().begin(), enc.values.data().end());
   out.action_log_probs.assign(E * sz(n), 0.0);
   out.agent_log_probs.assign(E * sz(n - 1), 0.0);
   out.order_entropies.assign(E * sz(n - 1), 0.0);

   std::vector< std::vector< int > > order(E);
   std::vector< std::vector< std::uint8_t > > chosen(E, std::vector< std::uint8_t >(sz(n), 0));
   for(std::size_t e = 0; e < E; ++e) {
      order[e] = fixed_orders[e] ? fixed_orders[e]->indices() : std::vector< int >{lead_agent};
      chosen[e][sz(order[e][0])] = 1;
   }
   std::vector< double > swapped_actions(E * sz(n) * width, 0.0);

   for(int m = 1; m <= n; ++m) {
      const auto L = sz(m);
      std::vector< int > idx;
      idx.reserve(E * L);
      for(std::size_t e = 0; e < E; ++e) {
         idx.insert(idx.end(), order[e].begin(), order[e].begin() + m);
      }
      Tensor reps = gather_rows(enc.reps, idx, L);
      std::vector< double > prev;
      prev.reserve(E * (L - 1) * width);
      for(std::size_t e = 0; e < E; ++e) {
         auto first = swapped_actions.begin() + static_cast< std::ptrdiff_t >(e * sz(n) * width);
         prev.insert(prev.end(), first, first + static_cast< std::ptrdiff_t >((L - 1) * width));
      }
      const DecoderOutput dec = net.decode_prefix(reps, Tensor(Shape{E, L - 1, width}, std::move(prev)));
      auto act_out = dec.action_out.data();
      auto next_out = dec.next_agent_logits.data();

      for(std::size_t e = 0; e < E; ++e) {
         const std::size_t slot = e * L + (L - 1);
         auto params = act_out.subspan(slot * head, head);
         SampledAction a = discrete ? sample_discrete(params, action_mode, rng)
                                    : sample_gaussian(params, dec.log_std.data(), action_mode, rng);
         std::copy(a.value.begin(), a.value.end(), swapped_actions.begin() + static_cast< std::ptrdiff_t >((e * sz(n) + L - 1) * width));
         out.action_log_probs[e * sz(n) + L - 1] = a.log_prob;

         if(m < n && ! fixed_orders[e]) {
            auto logits = next_out.subspan(slot * sz(n), sz(n));
            NextAgentChoice c = mask_and_sample_next(logits, chosen[e], order_mode, rng);
            order[e].push_back(c.agent);
            chosen[e][sz(c.agent)] = 1;
            out.agent_log_probs[e * sz(n - 1) + L - 1] = c.log_prob;
            out.order_entropies[e * sz(n - 1) + L - 1] = c.entropy;
         }
      }
   }

   out.actions.assign(E * sz(n) * width, 0.0);
   for(std::size_t e = 0; e < E; ++e) {
      DecisionOrder ao(order[e]);
      auto block = std::span< const double >(swapped_actions).subspan(e * sz(n) * width, sz(n) * width);
      auto restored = restore_rows_by_order(block, width, ao);
      std::copy(restored.begin(), restored.end(), out.actions.begin() + static_cast< std::ptrdiff_t >(e * sz(n) * width));
      out.orders.push_back(std::move(ao));
   }
   return out;
}

// ---------------------------------------------------------------- worker

namespace {

StepResult checked_step(const Env& env, const EnvState& state, std::span< const double > action, Rng& rng, int t, std::size_t e) {
   try {
      return env.step(state, action, rng);
   } catch(const InvalidArgument& ex) {
      throw InvalidArgument("env " + std::to_string(e) + " step " + std::to_string(t) + ": " + ex.what());
   } catch(const std::exception& ex) {
      throw InvalidState("env " + std::to_string(e) + " step " + std::to_string(t) + ": " + ex.what());
   }
}

double mean_of(std::span< const double > v) {
   if(v.empty()) {
      return 0.0;
   }
   double s = 0.0;
   for(double x : v) {
      s += x;
   }
   return s / static_cast< double >(v.size());
}

}  // namespace

RolloutWorker::RolloutWorker(const Env& env, OrderStrategy strategy, int lead_agent, int n_envs, std::uint64_t seed)
    : env_(env), strategy_(std::move(strategy)), lead_(lead_agent), rng_(seed) {
   if(n_envs < 1) {
      throw InvalidArgument("rollout: n_envs must be >= 1");
   }
   const int n = env.spec().n_agents;
   for(int e = 0; e < n_envs; ++e) {
      schedules_.emplace_back(strategy_, n, lead_agent);
      states_.push_back(env_.reset(rng_));
      schedules_.back().begin_episode(rng_);
   }
   running_returns_.assign(sz(n_envs), 0.0);
}

TrajectoryBatch RolloutWorker::collect(const TransformerActorCritic& net, int steps) {
   const auto& spec = env_.spec();
   const auto& cfg = net.config();
   if(cfg.n_agents != spec.n_agents || cfg.obs_dim != spec.obs_dim || ! (cfg.action_space == spec.action_space)) {
      throw InvalidArgument("rollout: network and environment disagree on agents, observations or actions");
   }
   if(steps < 0) {
      throw InvalidArgument("rollout: steps must be >= 0");
   }
   const int n = spec.n_agents;
   const std::size_t E = states_.size();
   TrajectoryBatch b;
   b.steps = steps;
   b.n_envs = static_cast< int >(E);
   b.n_agents = n;
   b.obs_dim = spec.obs_dim;
   b.action_width = cfg.action_space.width();
   b.learned_order = strategy_.is_learned();

   std::vector< JointObservation > obs(E);
   std::vector< std::optional< DecisionOrder > > fixed(E);
   for(int t = 0; t < steps; ++t) {
      for(std::size_t e = 0; e < E; ++e) {
         obs[e] = env_.observe(states_[e]);
         fixed[e] = schedules_[e].next_order(rng_);
      }
      JointDecision d = decide(net, obs, fixed, lead_, SelectMode::sample, SelectMode::sample, rng_);
      const std::size_t w = sz(b.action_width);
      for(std::size_t e = 0; e < E; ++e) {
         for(const auto& o : obs[e]) {
            b.obs.insert(b.obs.end(), o.begin(), o.end());
         }
         auto act = std::span< const double >(d.actions).subspan(e * sz(n) * w, sz(n) * w);
         b.actions.insert(b.actions.end(), act.begin(), act.end());
         b.orders.insert(b.orders.end(), d.orders[e].indices().begin(), d.orders[e].indices().end());
         auto vals = std::span< const double >(d.values).subspan(e * sz(n), sz(n));
         b.values.insert(b.values.end(), vals.begin(), vals.end());
         auto alp = std::span< const double >(d.action_log_probs).subspan(e * sz(n), sz(n));
         b.action_log_probs.insert(b.action_log_probs.end(), alp.begin(), alp.end());
         auto glp = std::span< const double >(d.agent_log_probs).subspan(e * sz(n - 1), sz(n - 1));
         b.agent_log_probs.insert(b.agent_log_probs.end(), glp.begin(), glp.end());
         b.order_entropy.push_back(mean_of(std::span< const double >(d.order_entropies).subspan(e * sz(n - 1), sz(n - 1))));

         StepResult r = checked_step(env_, states_[e], act, rng_, t, e);
         b.rewards.push_back(r.reward);
         b.dones.push_back(r.done ? 1 : 0);
         running_returns_[e] += r.reward;
         if(r.done) {
            b.episode_returns.push_back(running_returns_[e]);
            running_returns_[e] = 0.0;
            states_[e] = env_.reset(rng_);
            schedules_[e].begin_episode(rng_);
         } else {
            states_[e] = std::move(r.next);
         }
      }
   }

   {
      NoGradGuard no_grad;
      for(std::size_t e = 0; e < E; ++e) {
         obs[e] = env_.observe(states_[e]);
      }
      const EncoderOutput enc = net.encode(stack_observations(obs, n, spec.obs_dim));
      b.bootstrap_values.assign(enc.values.data().begin(), enc.values.data().end());
   }
   b.validate();
   return b;
}

TrajectoryBatch collect(
   const Env& env,
   const TransformerActorCritic& net,
   const OrderStrategy& strategy,
   int lead_agent,
   int steps,
   std::uint64_t seed
) {
   RolloutWorker worker(env, strategy, lead_agent, 1, seed);
   return worker.collect(net, steps);
}

// ---------------------------------------------------------------- evaluate

double quantile(std::vector< double > values, double q) {
   if(values.empty()) {
      return 0.0;
   }
   std::sort(values.begin(), values.end());
   const double pos = std::clamp(q, 0.0, 1.0) * static_cast< double >(values.size() - 1);
   const auto lo = static_cast< std::size_t >(std::floor(pos));
   const auto hi = std::min(lo + 1, values.size() - 1);
   return values[lo] + (pos - static_cast< double >(lo)) * (values[hi] - values[lo]);
}

EvalResult evaluate(
   const Env& env,
   const TransformerActorCritic& net,
   const OrderStrategy& strategy,
   int lead_agent,
   int episodes,
   std::uint64_t seed,
   SelectMode mode
) {
   if(episodes < 1) {
      throw InvalidArgument("evaluate: episodes must be >= 1");
   }
   const int n = env.spec().n_agents;
   const auto E = sz(episodes);
   Rng rng(seed);
   std::vector< OrderSchedule > schedules;
   std::vector< EnvState > states;
   for(std::size_t e = 0; e < E; ++e) {
      schedules.emplace_back(strategy, n, lead_agent);
      states.push_back(env.reset(rng));
      schedules.back().begin_episode(rng);
   }
   std::vector< double > returns(E, 0.0);
   std::vector< std::vector< double > > traces(E);
   std::vector< double > pos_sum(sz(std::max(n - 1, 0)), 0.0);
   double pos_count = 0.0;
   std::vector< std::uint8_t > active(E, 1);
   const std::size_t w = sz(net.config().action_space.width());

   int t = 0;
   while(std::any_of(active.begin(), active.end(), [](std::uint8_t a) { return a != 0; })) {
      std::vector< JointObservation > obs(E);
      std::vector< std::optional< DecisionOrder > > fixed(E);
      for(std::size_t e = 0; e < E; ++e) {
         obs[e] = env.observe(states[e]);
         fixed[e] = schedules[e].next_order(rng);
      }
      JointDecision d = decide(net, obs, fixed, lead_agent, mode, mode, rng);
      for(std::size_t e = 0; e < E; ++e) {
         if(! active[e]) {
            continue;
         }
         auto ent = std::span< const double >(d.order_entropies).subspan(e * sz(n - 1), sz(n - 1));
         traces[e].push_back(mean_of(ent));
         for(std::size_t k = 0; k < ent.size(); ++k) {
            pos_sum[k] += ent[k];
         }
         pos_count += 1.0;
         auto act = std::span< const double >(d.actions).subspan(e * sz(n) * w, sz(n) * w);
         StepResult r = checked_step(env, states[e], act, rng, t, e);
         returns[e] += r.reward;
         if(r.done) {
            active[e] = 0;
         } else {
            states[e] = std::move(r.next);
         }
      }
      ++t;
   }

   EvalResult res;
   res.returns = returns;
   res.mean = mean_of(returns);
   res.median = quantile(returns, 0.5);
   res.q25 = quantile(returns, 0.25);
   res.q75 = quantile(returns, 0.75);
   for(auto& tr : traces) {
      res.entropy_trace.insert(res.entropy_trace.end(), tr.begin(), tr.end());
   }
   res.mean_entropy = mean_of(res.entropy_trace);
   for(double s : pos_sum) {
      res.position_entropy.push_back(pos_count > 0.0 ? s / pos_count : 0.0);
   }
   return res;
}

}  // namespace ordermat
