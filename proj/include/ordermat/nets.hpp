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

#ifndef ORDERMAT_NETS_HPP
#define ORDERMAT_NETS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordermat/nn.hpp"
#include "ordermat/tensor.hpp"

namespace ordermat {

/// n per-agent observation vectors in canonical agent order.
using JointObservation = std::vector< std::vector< double > >;

enum class ActionKind { discrete, continuous };

struct ActionSpace {
   ActionKind kind = ActionKind::discrete;
   int categories = 2;  // discrete
   int dim = 1;         // continuous
   double low = -1.0;   // continuous bounds
   double high = 1.0;

   static ActionSpace discrete(int categories);
   static ActionSpace continuous(int dim, double low, double high);

   /// Stored values per agent action: 1 (category index) or `dim`.
   [[nodiscard]] int width() const { return kind == ActionKind::discrete ? 1 : dim; }
   /// Output size of the action head: logits or Gaussian means.
   [[nodiscard]] int head_size() const { return kind == ActionKind::discrete ? categories : dim; }
   bool operator==(const ActionSpace&) const = default;
};

/// `full` is plain self-attention across agents. `local` lets each token
/// attend only to itself, so a representation carries only its own agent's
/// observation and cross-agent information reaches a decision solely through
/// the decoder's causal path.
enum class EncoderAttention { full, local };

struct NetConfig {
   int n_agents = 2;
   int obs_dim = 1;
   ActionSpace action_space;
   int hidden_dim = 64;
   int n_blocks = 1;
   int n_heads = 1;
   EncoderAttention encoder_attention = EncoderAttention::full;
   /// Init scale of the final action and next-agent layers.
   double output_gain = 0.01;

   void validate() const;
   bool operator==(const NetConfig&) const = default;
};

nlohmann::json to_json(const NetConfig& config);
NetConfig net_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActionSpace& space);
ActionSpace action_space_from_json(const nlohmann::json& j);

struct EncoderOutput {
   Tensor reps;    // [B, n, d], canonical agent order
   Tensor values;  // [B, n]
};

/// Batched decoder output over L decision slots.
struct DecoderOutput {
   Tensor action_out;         // logits [B, L, A] or Gaussian means [B, L, D]
   Tensor log_std;            // [D]; continuous action spaces only
   Tensor next_agent_logits;  // [B, L, n], unmasked
};

/// The two distributions produced at one decision slot.
struct DualPolicyOutput {
   ActionKind kind = ActionKind::discrete;
   std::vector< double > action_probs;  // discrete
   std::vector< double > action_mean;   // continuous
   std::vector< double > action_std;    // continuous
   std::vector< double > next_agent_logits;
};

/**
 * Encoder-decoder transformer: the encoder is the critic (per-agent values
 * from per-agent representations), the decoder is the actor with two heads
 * on a shared trunk: the current agent's action and the identity of the
 * next agent to decide.
 *
 * Decoder slot j reads the representation at decision position j and the
 * actions of positions 0..j-1 (slot 0 reads a learned dummy action). Both
 * attention layers are causal, so slot j never sees positions > j.
 */
class TransformerActorCritic {
  public:
   TransformerActorCritic(NetConfig config, std::uint64_t seed);

   [[nodiscard]] const NetConfig& config() const { return config_; }
   [[nodiscard]] ParameterSet& parameters() { return params_; }
   [[nodiscard]] const ParameterSet& parameters() const { return params_; }
   [[nodiscard]] std::vector< Tensor > encoder_parameters() const;
   [[nodiscard]] std::vector< Tensor > decoder_parameters() const;

   /// obs [B, n, obs_dim] in canonical order.
   [[nodiscard]] EncoderOutput encode(const Tensor& obs) const;
   [[nodiscard]] EncoderOutput encode(const JointObservation& obs) const;

   /// Decoder over the first L slots. reps_swapped [B, L, d] in decision
   /// order; prev_actions [B, L-1, width] holds the actions of slots 0..L-2.
   [[nodiscard]] DecoderOutput decode_prefix(const Tensor& reps_swapped, const Tensor& prev_actions) const;

   /// Teacher-forced pass over all n slots. actions_swapped [B, n, width]
   /// are the executed actions in decision order; the dummy is prepended and
   /// the last action dropped internally.
   [[nodiscard]] DecoderOutput decode_parallel(const Tensor& reps_swapped, const Tensor& actions_swapped) const;

   /// Output at decision position m (1-based). reps_swapped [1, n, d] or
   /// [n, d]; action_prefix holds the m-1 actions before position m (the
   /// dummy is implicit).
   [[nodiscard]] DualPolicyOutput decode_step(
      const Tensor& reps_swapped,
      std::span< const double > action_prefix,
      int m
   ) const;

  private:
   struct EncoderBlock {
      MultiHeadAttention attn;
      LayerNorm ln1;
      LayerNorm ln2;
      Linear fc1;
      Linear fc2;
   };
   struct DecoderBlock {
      MultiHeadAttention self_attn;
      MultiHeadAttention cross_attn;
      LayerNorm ln1;
      LayerNorm ln2;
      LayerNorm ln3;
      Linear fc1;
      Linear fc2;
   };
   struct Head {
      Linear fc;
      LayerNorm ln;
      Linear out;
      Tensor operator()(const Tensor& x) const { return out(ln(gelu(fc(x)))); }
   };

   Tensor embed_actions(const Tensor& prev_actions) const;

   NetConfig config_;
   ParameterSet params_;

   LayerNorm obs_ln_;
   Linear obs_embed_;
   LayerNorm enc_ln_;
   std::vector< EncoderBlock > enc_blocks_;
   Head value_head_;

   Tensor dummy_action_;
   Tensor pos_embedding_;
   Linear action_embed_;
   LayerNorm dec_ln_;
   std::vector< DecoderBlock > dec_blocks_;
   Head action_head_;
   Head next_agent_head_;
   Tensor log_std_;
};

}  // namespace ordermat

#endif  // ORDERMAT_NETS_HPP
