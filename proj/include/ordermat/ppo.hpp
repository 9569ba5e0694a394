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

#ifndef ORDERMAT_PPO_HPP
#define ORDERMAT_PPO_HPP

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/optim.hpp"
#include "ordermat/order.hpp"
#include "ordermat/rollout.hpp"

namespace ordermat {

enum class LossMode { product, weighted_sum };

struct TrainConfig {
   double gamma = 0.99;
   double gae_lambda = 0.95;
   double ppo_clip = 0.0125;
   int ppo_epochs = 15;
   int minibatches = 1;
   double actor_lr = 5e-4;
   double critic_lr = 5e-4;
   double optim_eps = 1e-5;
   double entropy_coef1 = 0.01;  // action head
   double entropy_coef2 = 0.01;  // next-agent head
   double max_grad_norm = 10.0;
   int rollout_threads = 64;     // environments stepped in lockstep
   int steps_per_rollout = 8;    // batch_size = rollout_threads * steps_per_rollout
   LossMode loss_mode = LossMode::product;
   double alpha1 = 0.5;
   double alpha2 = 0.5;
   bool use_huber = true;
   double huber_delta = 10.0;
   bool normalize_advantages = true;
   OrderStrategy order_strategy;
   int lead_agent = 0;

   [[nodiscard]] int batch_size() const { return rollout_threads * steps_per_rollout; }
   void validate() const;

   /// "smac-like" or "mujoco-like".
   static TrainConfig profile(const std::string& name);
};

nlohmann::json to_json(const TrainConfig& config);
/// Starts from j["profile"] (default "smac-like") and applies the keys
/// present in `j`.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossReport {
   double encoder_loss = 0.0;
   double decoder_loss = 0.0;
   double action_entropy = 0.0;
   double order_entropy = 0.0;
   double clip_fraction = 0.0;
   double grad_scale = 1.0;

   bool operator==(const LossReport&) const = default;
};

// ---------------------------------------------------------------- advantages

struct GaeResult {
   std::vector< double > advantages;
   std::vector< double > returns;
};

/// Single trajectory. values has length T + 1; values[T] bootstraps the
/// step after the last. A done step does not look past itself.
GaeResult compute_gae(
   std::span< const double > rewards,
   std::span< const double > values,
   std::span< const std::uint8_t > dones,
   double gamma,
   double lambda
);

/// One joint advantage per row of the batch, from agent-mean values.
GaeResult compute_batch_gae(const TrajectoryBatch& batch, double gamma, double lambda);

/// In place: zero mean, unit (population) standard deviation.
void normalize_advantages(std::vector< double >& advantages);

// ---------------------------------------------------------------- losses

/// A frozen slice of a batch: rows and the advantage of each row.
struct Minibatch {
   const TrajectoryBatch* batch = nullptr;
   std::vector< int > rows;
   std::vector< double > advantages;  // one per row
};

Minibatch full_minibatch(const TrajectoryBatch& batch, std::vector< double > advantages);

struct LossOutput {
   Tensor loss;
   LossReport report;
};

/// Mean over rows and agents of the squared (or Huber) TD(0) residual
/// R + gamma (1 - done) V_old(next) - V(now); V_old is the value stored at
/// collection time.
LossOutput encoder_loss(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config);

/// r_a and r_i per row and decision position, flattened [rows, n];
/// r_i is 1 at the last position and for non-learned orders.
struct RatioReport {
   std::vector< double > action_ratios;
   std::vector< double > agent_ratios;
};
RatioReport ratios(const TransformerActorCritic& net, const Minibatch& mb);

/// Clipped surrogate on r = r_a * r_i with action and order entropy bonuses.
LossOutput decoder_loss_product(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config);
/// alpha1 * clip-surrogate(r_a) + alpha2 * clip-surrogate(r_i).
LossOutput decoder_loss_weighted_sum(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config);
/// Surrogate on r_a alone with the action entropy bonus only.
LossOutput action_only_loss(const TransformerActorCritic& net, const Minibatch& mb, const TrainConfig& config);

// ---------------------------------------------------------------- update

class PpoTrainer {
  public:
   PpoTrainer(TransformerActorCritic& net, TrainConfig config);

   /// ppo_epochs passes over the batch; one report per epoch, averaged over
   /// its minibatches. Throws NumericError (with epoch and minibatch) on a
   /// non-finite loss.
   std::vector< LossReport > update(const TrajectoryBatch& batch, Rng& rng);

   [[nodiscard]] const TrainConfig& config() const { return config_; }

  private:
   TransformerActorCritic& net_;
   TrainConfig config_;
   Adam actor_;
   Adam critic_;
};

}  // namespace ordermat

#endif  // ORDERMAT_PPO_HPP
