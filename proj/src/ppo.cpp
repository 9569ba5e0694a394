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

#include "ordermat/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ordermat/errors.hpp"
#include "ordermat/nn.hpp"

namespace ordermat {

namespace {

std::size_t sz(int v) { return static_cast< std::size_t >(v); }

}  // namespace

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
   if(! (gamma >= 0.0 && gamma < 1.0)) {
      throw InvalidArgument("train config: gamma must lie in [0, 1)");
   }
   if(! (gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
      throw InvalidArgument("train config: gae_lambda must lie in [0, 1]");
   }
   if(! (ppo_clip > 0.0)) {
      throw InvalidArgument("train config: ppo_clip must be > 0");
   }
   if(ppo_epochs < 1 || minibatches < 1) {
      throw InvalidArgument("train config: ppo_epochs and minibatches must be >= 1");
   }
   if(! (actor_lr > 0.0 && critic_lr > 0.0 && optim_eps > 0.0)) {
      throw InvalidArgument("train config: learning rates and optim_eps must be > 0");
   }
   if(entropy_coef1 < 0.0 || entropy_coef2 < 0.0) {
      throw InvalidArgument("train config: entropy coefficients must be >= 0");
   }
   if(alpha1 < 0.0 || alpha2 < 0.0) {
      throw InvalidArgument("train config: alpha1 and alpha2 must be >= 0");
   }
   if(! (max_grad_norm > 0.0) || ! (huber_delta > 0.0)) {
      throw InvalidArgument("train config: max_grad_norm and huber_delta must be > 0");
   }
   if(rollout_threads < 1 || steps_per_rollout < 1) {
      throw InvalidArgument("train config: rollout_threads and steps_per_rollout must be >= 1");
   }
   if(minibatches > batch_size()) {
      throw InvalidArgument("train config: more minibatches than rows in a batch");
   }
}

TrainConfig TrainConfig::profile(const std::string& name) {
   TrainConfig c;
   if(name == "smac-like") {
      return c;
   }
   if(name == "mujoco-like") {
      c.ppo_clip = 0.025;
      c.ppo_epochs = 10;
      c.minibatches = 40;
      c.actor_lr = 5e-5;
      c.critic_lr = 5e-5;
      c.entropy_coef1 = 0.001;
      c.entropy_coef2 = 5e-5;
      c.max_grad_norm = 0.5;
      c.rollout_threads = 40;
      c.steps_per_rollout = 100;
      return c;
   }
   throw InvalidArgument("unknown hyperparameter profile: " + name);
}

nlohmann::json to_json(const TrainConfig& c) {
   return {
      {"gamma", c.gamma},
      {"gae_lambda", c.gae_lambda},
      {"ppo_clip", c.ppo_clip},
      {"ppo_epochs", c.ppo_epochs},
      {"minibatches", c.minibatches},
      {"actor_lr", c.actor_lr},
      {"critic_lr", c.critic_lr},
      {"optim_eps", c.optim_eps},
      {"entropy_coef1", c.entropy_coef1},
      {"entropy_coef2", c.entropy_coef2},
      {"max_grad_norm", c.max_grad_norm},
      {"rollout_threads", c.rollout_threads},
      {"steps_per_rollout", c.steps_per_rollout},
      {"loss_mode", c.loss_mode == LossMode::product ? "product" : "weighted_sum"},
      {"alpha1", c.alpha1},
      {"alpha2", c.alpha2},
      {"use_huber", c.use_huber},
      {"huber_delta", c.huber_delta},
      {"normalize_advantages", c.normalize_advantages},
      {"order_strategy", c.order_strategy.name()},
      {"lead_agent", c.lead_agent},
   };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
   TrainConfig c = TrainConfig::profile(j.value("profile", std::string("smac-like")));
   try {
      c.gamma = j.value("gamma", c.gamma);
      c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
      c.ppo_clip = j.value("ppo_clip", c.ppo_clip);
      c.ppo_epochs = j.value("ppo_epochs", c.ppo_epochs);
      c.minibatches = j.value("minibatches", c.minibatches);
      c.actor_lr = j.value("actor_lr", c.actor_lr);
      c.critic_lr = j.value("critic_lr", c.critic_lr);
      c.optim_eps = j.value("optim_eps", c.optim_eps);
      c.entropy_coef1 = j.value("entropy_coef1", c.entropy_coef1);
      c.entropy_coef2 = j.value("entropy_coef2", c.entropy_coef2);
      c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
      c.rollout_threads = j.value("rollout_threads", c.rollout_threads);
      c.steps_per_rollout = j.value("steps_per_rollout", c.steps_per_rollout);
      const auto mode = j.value("loss_mode", std::string("product"));
      if(mode == "product") {
         c.loss_mode = LossMode::product;
      } else if(mode == "weighted_sum") {
         c.loss_mode = LossMode::weighted_sum;
      } else {
         throw InvalidArgument("unknown loss_mode: " + mode);
      }
      c.alpha1 = j.value("alpha1", c.alpha1);
      c.alpha2 = j.value("alpha2", c.alpha2);
      c.use_huber = j.value("use_huber", c.use_huber);
      c.huber_delta = j.value("huber_delta", c.huber_delta);
      c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
      c.order_strategy = OrderStrategy::parse(j.value("order_strategy", std::string("learned")));
      c.lead_agent = j.value("lead_agent", c.lead_agent);
   } catch(const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("train config: ") + e.what());
   }
   c.validate();
   return c;
}

// ---------------------------------------------------------------- advantages

GaeResult compute_gae(
   std::span< const double > rewards,
   std::span< const double > values,
   std::span< const std::uint8_t > dones,
   double gamma,
   double lambda
) {
   const auto T = rewards.size();
   if(values.size() != T + 1 || dones.size() != T) {
      throw InvalidArgument("gae: need T rewards, T dones and T + 1 values");
   }
   GaeResult out;
   out.advantages.assign(T, 0.0);
   out.returns.assign(T, 0.0);
   double running = 0.0;
   for(std::size_t k = T; k-- > 0;) {
      const double live = dones[k] ? 0.0 : 1.0;
      const double delta = rewards[k] + gamma * live * values[k + 1] - values[k];
      running = delta + gamma * lambda * live * running;
      out.advantages[k] = running;
      out.returns[k] = running + values[k];
   }
   return out;
}

GaeResult compute_batch_gae(const TrajectoryBatch& batch, double gamma, double lambda) {
   batch.validate();
   const int T = batch.steps;
   const int E = batch.n_envs;
   const auto n = sz(batch.n_agents);
   auto agent_mean = [n](std::span< const double > v) {
      double s = 0.0;
      for(double x : v) {
         s += x;
      }
      return s / static_cast< double >(n);
   };
   GaeResult out;
   out.advantages.assign(sz(batch.rows()), 0.0);
   out.returns.assign(sz(batch.rows()), 0.0);
   std::vector< double > r(sz(T));
   std::vector< double > v(sz(T) + 1);
   std::vector< std::uint8_t > d(sz(T));
   for(int e = 0; e < E; ++e) {
      for(int t = 0; t < T; ++t) {
         const auto row = sz(t * E + e);
         r[sz(t)] = batch.rewards[row];
         d[sz(t)] = batch.dones[row];
         v[sz(t)] = agent_mean(std::span< const double >(batch.values).subspan(row * n, n));
      }
      v[sz(T)] = agent_mean(std::span< const double >(batch.bootstrap_values).subspan(sz(e) * n, n));
      GaeResult g = compute_gae(r, v, d, gamma, lambda);
      for(int t = 0; t < T; ++t) {
         out.advantages[sz(t * E + e)] = g.advantages[sz(t)];
         out.returns[sz(t * E + e)] = g.returns[sz(t)];
      }
   }
   return out;
}

void normalize_advantages(std::vector< double >& adv) {
   if(adv.empty()) {
      return;
   }
   const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast< double >(adv.size());
   double var = 0.0;
   for(double a : adv) {
      var += (a - mean) * (a - mean);
   }
   var /= static_cast< double >(adv.size());
   const double sd = std::sqrt(var) + 1e-8;
   for(double& a : adv) {
      a = (a - mean) / sd;
   }
}

// ---------------------------------------------------------------- losses

Minibatch full_minibatch(const TrajectoryBatch& batch, std::vector< double > advantages) {
   if(advantages.size() != sz(batch.rows())) {
      throw InvalidArgument("minibatch: one advantage per row required");
   }
   Minibatch mb;
   mb.batch = &batch;
   mb.rows.resize(sz(batch.rows()));
   std::iota(mb.rows.begin(), mb.rows.end(), 0);
   mb.advantages = std::move(advantages);
   return mb;
}

namespace {

void check_minibatch(const TransformerActorCritic& net, const Minibatch& mb) {
   if(mb.batch == nullptr || mb.rows.empty() || mb.rows.size() != mb.advantages.size()) {
      throw InvalidArgument("minibatch: needs a batch, rows and one advantage per row");
   }
   const auto& b = *mb.batch;
   const auto& cfg = net.config();
   if(b.n_agents != cfg.n_agents || b.obs_dim != cfg.obs_dim || b.action_width != cfg.action_space.width()) {
      throw InvalidArgument("minibatch: batch dimensions do not match the network");
   }
   for(int r : mb.rows) {
      if(r < 0 || r >= b.rows()) {
         throw InvalidArgument("minibatch: row index out of range");
      }
   }
}

Tensor gather_obs(const Minibatch& mb) {
   const auto& b = *mb.batch;
   const auto width = sz(b.n_agents) * sz(b.obs_dim);
   std::vector< double > flat;
   flat.reserve(mb.rows.size() * width);
   for(int r : mb.rows) {
      auto first = b.obs.begin() + static_cast< std::ptrdiff_t >(sz(r) * width);
      flat.insert(flat.end(), first, first + static_cast< std::ptrdiff_t >(width));
   }
   return Tensor(Shape{mb.rows.size(), sz(b.n_agents), sz(b.obs_dim)}, std::move(flat));
}

/// Row-wise slice of a [rows, k] array into a tensor.
Tensor gather_matrix(const std::vector< double >& src, std::span< const int > rows, std::size_t k) {
   std::vector< double > out;
   out.reserve(rows.size() * k);
   for(int r : rows) {
      auto first = src.begin() + static_cast< std::ptrdiff_t >(sz(r) * k);
      out.insert(out.end(), first, first + static_cast< std::ptrdiff_t >(k));
   }
   return Tensor(Shape{rows.size(), k}, std::move(out));
}

/// Per-row advantage repeated over n decision positions.
Tensor expand_advantages(std::span< const double > adv, std::size_t n) {
   std::vector< double > out;
   out.reserve(adv.size() * n);
   for(double a : adv) {
      out.insert(out.end(), n, a);
   }
   return Tensor(Shape{adv.size(), n}, std::move(out));
}

struct PolicyEval {
   Tensor action_log_probs;  // [B, n]
   Tensor action_entropy;    // [B, n] or scalar (Gaussian)
   Tensor action_ratio;      // [B, n]
   Tensor agent_ratio;       // [B, n], 1 at the last position
   Tensor order_entropy;     // [B, n-1]; undefined without a learned order
   bool learned = false;
};

PolicyEval evaluate_policy(const TransformerActorCritic& net, const Minibatch& mb) {
   check_minibatch(net, mb);
   const auto& b = *mb.batch;
   const auto& cfg = net.config();
   const auto B = mb.rows.size();
   const auto n = sz(cfg.n_agents);
   const auto width = sz(cfg.action_space.width());

   const EncoderOutput enc = net.encode(gather_obs(mb));

   std::vector< int > idx;
   std::vector< double > swapped;
   idx.reserve(B * n);
   swapped.reserve(B * n * width);
   for(int r : mb.rows) {
      const DecisionOrder ao = b.order(r);
      idx.insert(idx.end(), ao.indices().begin(), ao.indices().end());
      auto block = std::span< const double >(b.actions).subspan(sz(r) * n * width, n * width);
      auto s = swap_rows_by_order(block, width, ao);
      swapped.insert(swapped.end(), s.begin(), s.end());
   }
   const Tensor reps = gather_rows(enc.reps, idx, n);
   const DecoderOutput dec = net.decode_parallel(reps, Tensor(Shape{B, n, width}, swapped));

   PolicyEval pe;
   if(cfg.action_space.kind == ActionKind::discrete) {
      const auto cats = sz(cfg.action_space.categories);
      std::vector< int > chosen(swapped.begin(), swapped.end());
      Tensor logits = reshape(dec.action_out, Shape{B * n, cats});
      pe.action_log_probs = reshape(categorical_log_prob(logits, chosen), Shape{B, n});
      pe.action_entropy = reshape(categorical_entropy(logits), Shape{B, n});
   } else {
      Tensor x(Shape{B, n, width}, swapped);
      pe.action_log_probs = gaussian_log_prob(dec.action_out, dec.log_std, x);
      pe.action_entropy = gaussian_entropy(dec.log_std);
   }
   const Tensor old_a = gather_matrix(b.action_log_probs, mb.rows, n);
   pe.action_ratio = exp(subtract(pe.action_log_probs, old_a));

   pe.learned = b.learned_order && n > 1;
   if(! pe.learned) {
      pe.agent_ratio = Tensor::full(Shape{B, n}, 1.0);
      return pe;
   }
   // Slot m predicts the agent at position m + 1 among those not yet placed.
   const auto k = n - 1;
   std::vector< std::uint8_t > mask(B * k * n, 0);
   std::vector< int > next(B * k);
   for(std::size_t row = 0; row < B; ++row) {
      const auto* ord = &idx[row * n];
      for(std::size_t m = 0; m < k; ++m) {
         for(std::size_t p = 0; p <= m; ++p) {
            mask[(row * k + m) * n + sz(ord[p])] = 1;
         }
         next[row * k + m] = ord[m + 1];
      }
   }
   Tensor logits = mask_fill(narrow(dec.next_agent_logits, 1, 0, k), mask, kMaskedLogit);
   Tensor flat = reshape(logits, Shape{B * k, n});
   Tensor new_i = reshape(categorical_log_prob(flat, next), Shape{B, k});
   pe.order_entropy = reshape(categorical_entropy(flat), Shape{B, k});
   const Tensor old_i = gather_matrix(b.agent_log_probs, mb.rows, k);
   pe.agent_ratio = concat({exp(subtract(new_i, old_i)), Tensor::full(Shape{B, 1}, 1.0)}, 1);
   return pe;
}

/// -mean(min(r A, clip(r) A)) and the fraction of clipped entries.
Tensor clipped_surrogate(const Tensor& ratio, const Tensor& adv, double eps, double& clip_fraction) {
   Tensor unclipped = multiply(ratio, adv);
   Tensor clipped = multiply(clamp(ratio, 1.0 - eps, 1.0 + eps), adv);
   std::size_t outside = 0;
   for(double r : ratio.data()) {
      outside += std::abs(r - 1.0) > eps ? 1 : 0;
   }
   clip_fraction = static_cast< double >(outside) / static_cast< double >(ratio.numel());
   return -mean(minimum(unclipped, clipped));
}

LossOutput finish_decoder_loss(Tensor surrogate, const PolicyEval& pe, const TrainConfig& config, double clip_fraction, bool use_order_entropy) {
   LossOutput out;
   Tensor h_a = mean(pe.action_entropy);
   Tensor loss = subtract(surrogate, scale(h_a, config.entropy_coef1));
   out.report.action_entropy = h_a.item();
   if(use_order_entropy && pe.learned) {
      Tensor h_i = mean(pe.order_entropy);
      loss = subtract(loss, scale(h_i, config.entropy_coef2));
      out.report.order_entropy = h_i.item();
   }
   out.report.decoder_loss = loss.item();
   out.report.clip_fraction = clip_fraction;
   out.loss = loss;
   return out;
}

}  // namespace

LossOutput encoder_loss(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config) {
   check_minibatch(net, mb);
   const auto& b = *mb.batch;
   const auto n = sz(b.n_agents);
   const auto next = b.next_values();
   std::vector< double > target;
   target.reserve(mb.rows.size() * n);
   for(int r : mb.rows) {
      const double live = b.dones[sz(r)] ? 0.0 : 1.0;
      for(std::size_t i = 0; i < n; ++i) {
         target.push_back(b.rewards[sz(r)] + config.gamma * live * next[sz(r) * n + i]);
      }
   }
   const EncoderOutput enc = net.encode(gather_obs(mb));
   Tensor residual = subtract(Tensor(Shape{mb.rows.size(), n}, std::move(target)), enc.values);
   Tensor per_entry;
   if(config.use_huber) {
      // a r - a^2 / 2 with a = clamp(r, -delta, delta) is Huber in both regions.
      Tensor a = clamp(residual, -config.huber_delta, config.huber_delta);
      per_entry = subtract(multiply(a, residual), scale(square(a), 0.5));
   } else {
      per_entry = square(residual);
   }
   LossOutput out;
   out.loss = mean(per_entry);
   out.report.encoder_loss = out.loss.item();
   return out;
}

RatioReport ratios(const TransformerActorCritic& net, const Minibatch& mb) {
   NoGradGuard no_grad;
   const PolicyEval pe = evaluate_policy(net, mb);
   RatioReport out;
   out.action_ratios.assign(pe.action_ratio.data().begin(), pe.action_ratio.data().end());
   out.agent_ratios.assign(pe.agent_ratio.data().begin(), pe.agent_ratio.data().end());
   return out;
}

LossOutput decoder_loss_product(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config) {
   const PolicyEval pe = evaluate_policy(net, mb);
   const Tensor adv = expand_advantages(mb.advantages, sz(net.config().n_agents));
   double clip_fraction = 0.0;
   Tensor surrogate = clipped_surrogate(multiply(pe.action_ratio, pe.agent_ratio), adv, config.ppo_clip, clip_fraction);
   return finish_decoder_loss(surrogate, pe, config, clip_fraction, true);
}

LossOutput decoder_loss_weighted_sum(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config) {
   const PolicyEval pe = evaluate_policy(net, mb);
   const Tensor adv = expand_advantages(mb.advantages, sz(net.config().n_agents));
   double frac_a = 0.0;
   double frac_i = 0.0;
   Tensor s_a = clipped_surrogate(pe.action_ratio, adv, config.ppo_clip, frac_a);
   Tensor s_i = clipped_surrogate(pe.agent_ratio, adv, config.ppo_clip, frac_i);
   Tensor surrogate = add(scale(s_a, config.alpha1), scale(s_i, config.alpha2));
   return finish_decoder_loss(surrogate, pe, config, 0.5 * (frac_a + frac_i), true);
}

LossOutput action_only_loss(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config) {
   const PolicyEval pe = evaluate_policy(net, mb);
   const Tensor adv = expand_advantages(mb.advantages, sz(net.config().n_agents));
   double clip_fraction = 0.0;
   Tensor surrogate = clipped_surrogate(pe.action_ratio, adv, config.ppo_clip, clip_fraction);
   return finish_decoder_loss(surrogate, pe, config, clip_fraction, false);
}

// ---------------------------------------------------------------- update

PpoTrainer::PpoTrainer(TransformerActorCritic& net, TrainConfig config)
    : net_(net),
      config_(std::move(config)),
      actor_(net.decoder_parameters(), AdamOptions{config_.actor_lr, 0.9, 0.999, config_.optim_eps}),
      critic_(net.encoder_parameters(), AdamOptions{config_.critic_lr, 0.9, 0.999, config_.optim_eps}) {
   config_.validate();
}

std::vector< LossReport > PpoTrainer::update(const TrajectoryBatch& batch, Rng& rng) {
   batch.validate();
   if(batch.rows() < config_.minibatches) {
      throw InvalidArgument("update: fewer rows than minibatches");
   }
   GaeResult gae = compute_batch_gae(batch, config_.gamma, config_.gae_lambda);
   if(config_.normalize_advantages) {
      normalize_advantages(gae.advantages);
   }
   std::vector< Tensor > params = net_.parameters().tensors();
   std::vector< int > perm(sz(batch.rows()));
   std::iota(perm.begin(), perm.end(), 0);
   const auto mb_count = sz(config_.minibatches);

   std::vector< LossReport > reports;
   for(int epoch = 0; epoch < config_.ppo_epochs; ++epoch) {
      for(std::size_t k = perm.size(); k > 1; --k) {
         std::swap(perm[k - 1], perm[uniform_index(rng, k)]);
      }
      LossReport acc;
      acc.grad_scale = 0.0;
      for(std::size_t mbi = 0; mbi < mb_count; ++mbi) {
         const std::size_t lo = perm.size() * mbi / mb_count;
         const std::size_t hi = perm.size() * (mbi + 1) / mb_count;
         Minibatch mb;
         mb.batch = &batch;
         mb.rows.assign(perm.begin() + static_cast< std::ptrdiff_t >(lo), perm.begin() + static_cast< std::ptrdiff_t >(hi));
         for(int r : mb.rows) {
            mb.advantages.push_back(gae.advantages[sz(r)]);
         }
         LossReport rep;
         try {
            LossOutput enc = encoder_loss(net_, mb, config_);
            LossOutput dec = config_.loss_mode == LossMode::product ? decoder_loss_product(net_, mb, config_)
                                                                    : decoder_loss_weighted_sum(net_, mb, config_);
            rep = dec.report;
            rep.encoder_loss = enc.report.encoder_loss;
            net_.parameters().zero_grad();
            add(enc.loss, dec.loss).backward();
            rep.grad_scale = clip_global_norm(params, config_.max_grad_norm);
         } catch(const NumericError& e) {
            throw NumericError(
               "update aborted at epoch " + std::to_string(epoch) + ", minibatch " + std::to_string(mbi) + ": " + e.what()
            );
         }
         actor_.step();
         critic_.step();
         const double w = 1.0 / static_cast< double >(mb_count);
         acc.encoder_loss += w * rep.encoder_loss;
         acc.decoder_loss += w * rep.decoder_loss;
         acc.action_entropy += w * rep.action_entropy;
         acc.order_entropy += w * rep.order_entropy;
         acc.clip_fraction += w * rep.clip_fraction;
         acc.grad_scale += w * rep.grad_scale;
      }
      reports.push_back(acc);
   }
   return reports;
}

}  // namespace ordermat
