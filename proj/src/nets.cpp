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

#include "ordermat/nets.hpp"

#include <cmath>

namespace ordermat {

ActionSpace ActionSpace::discrete(int categories) {
   ActionSpace s;
   s.kind = ActionKind::discrete;
   s.categories = categories;
   return s;
}

ActionSpace ActionSpace::continuous(int dim, double low, double high) {
   ActionSpace s;
   s.kind = ActionKind::continuous;
   s.dim = dim;
   s.low = low;
   s.high = high;
   return s;
}

void NetConfig::validate() const {
   if(n_agents < 1) {
      throw InvalidArgument("net config: n_agents must be >= 1");
   }
   if(obs_dim < 1) {
      throw InvalidArgument("net config: obs_dim must be >= 1");
   }
   if(hidden_dim < 1 || n_heads < 1 || hidden_dim % n_heads != 0) {
      throw InvalidArgument("net config: hidden_dim must be a positive multiple of n_heads");
   }
   if(n_blocks < 1) {
      throw InvalidArgument("net config: n_blocks must be >= 1");
   }
   if(action_space.kind == ActionKind::discrete && action_space.categories < 1) {
      throw InvalidArgument("net config: discrete action space needs >= 1 category");
   }
   if(action_space.kind == ActionKind::continuous
      && (action_space.dim < 1 || ! (action_space.low < action_space.high))) {
      throw InvalidArgument("net config: continuous action space needs dim >= 1 and low < high");
   }
   if(! (output_gain > 0.0)) {
      throw InvalidArgument("net config: output_gain must be positive");
   }
}

nlohmann::json to_json(const ActionSpace& space) {
   if(space.kind == ActionKind::discrete) {
      return {{"kind", "discrete"}, {"categories", space.categories}};
   }
   return {{"kind", "continuous"}, {"dim", space.dim}, {"low", space.low}, {"high", space.high}};
}

ActionSpace action_space_from_json(const nlohmann::json& j) {
   const auto kind = j.at("kind").get< std::string >();
   if(kind == "discrete") {
      return ActionSpace::discrete(j.at("categories").get< int >());
   }
   if(kind == "continuous") {
      return ActionSpace::continuous(j.at("dim").get< int >(), j.at("low").get< double >(), j.at("high").get< double >());
   }
   throw InvalidArgument("unknown action space kind: " + kind);
}

nlohmann::json to_json(const NetConfig& c) {
   return {
      {"n_agents", c.n_agents},
      {"obs_dim", c.obs_dim},
      {"action_space", to_json(c.action_space)},
      {"hidden_dim", c.hidden_dim},
      {"n_blocks", c.n_blocks},
      {"n_heads", c.n_heads},
      {"encoder_attention", c.encoder_attention == EncoderAttention::full ? "full" : "local"},
      {"output_gain", c.output_gain},
   };
}

NetConfig net_config_from_json(const nlohmann::json& j) {
   NetConfig c;
   c.n_agents = j.at("n_agents").get< int >();
   c.obs_dim = j.at("obs_dim").get< int >();
   c.action_space = action_space_from_json(j.at("action_space"));
   c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
   c.n_blocks = j.value("n_blocks", c.n_blocks);
   c.n_heads = j.value("n_heads", c.n_heads);
   const auto attn = j.value("encoder_attention", std::string("full"));
   if(attn == "full") {
      c.encoder_attention = EncoderAttention::full;
   } else if(attn == "local") {
      c.encoder_attention = EncoderAttention::local;
   } else {
      throw InvalidArgument("unknown encoder_attention: " + attn);
   }
   c.output_gain = j.value("output_gain", c.output_gain);
   c.validate();
   return c;
}

TransformerActorCritic::TransformerActorCritic(NetConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
   config_.validate();
   Rng rng(seed);
   const auto d = static_cast< std::size_t >(config_.hidden_dim);
   const auto n = static_cast< std::size_t >(config_.n_agents);
   const auto heads = static_cast< std::size_t >(config_.n_heads);
   const auto obs_dim = static_cast< std::size_t >(config_.obs_dim);
   const auto& space = config_.action_space;

   obs_ln_ = LayerNorm::create(params_, "encoder.obs_ln", obs_dim);
   obs_embed_ = Linear::create(params_, "encoder.obs_embed", obs_dim, d, rng);
   enc_ln_ = LayerNorm::create(params_, "encoder.ln", d);
   for(int b = 0; b < config_.n_blocks; ++b) {
      const std::string p = "encoder.block" + std::to_string(b);
      EncoderBlock blk;
      blk.attn = MultiHeadAttention::create(params_, p + ".attn", d, heads, rng);
      blk.ln1 = LayerNorm::create(params_, p + ".ln1", d);
      blk.ln2 = LayerNorm::create(params_, p + ".ln2", d);
      blk.fc1 = Linear::create(params_, p + ".fc1", d, d, rng);
      blk.fc2 = Linear::create(params_, p + ".fc2", d, d, rng);
      enc_blocks_.push_back(std::move(blk));
   }
   value_head_.fc = Linear::create(params_, "encoder.value.fc", d, d, rng);
   value_head_.ln = LayerNorm::create(params_, "encoder.value.ln", d);
   value_head_.out = Linear::create(params_, "encoder.value.out", d, 1, rng);

   dummy_action_ = params_.create("decoder.dummy_action", Shape{d}, fan_in_uniform(d, d, 1.0, rng));
   pos_embedding_ = params_.create("decoder.pos_embedding", Shape{n, d}, fan_in_uniform(d, n * d, 1.0, rng));
   if(space.kind == ActionKind::discrete) {
      action_embed_ = Linear::create(
         params_, "decoder.action_embed", static_cast< std::size_t >(space.categories), d, rng, 1.0, false
      );
   } else {
      action_embed_ = Linear::create(params_, "decoder.action_embed", static_cast< std::size_t >(space.dim), d, rng);
   }
   dec_ln_ = LayerNorm::create(params_, "decoder.ln", d);
   for(int b = 0; b < config_.n_blocks; ++b) {
      const std::string p = "decoder.block" + std::to_string(b);
      DecoderBlock blk;
      blk.self_attn = MultiHeadAttention::create(params_, p + ".self_attn", d, heads, rng);
      blk.cross_attn = MultiHeadAttention::create(params_, p + ".cross_attn", d, heads, rng);
      blk.ln1 = LayerNorm::create(params_, p + ".ln1", d);
      blk.ln2 = LayerNorm::create(params_, p + ".ln2", d);
      blk.ln3 = LayerNorm::create(params_, p + ".ln3", d);
      blk.fc1 = Linear::create(params_, p + ".fc1", d, d, rng);
      blk.fc2 = Linear::create(params_, p + ".fc2", d, d, rng);
      dec_blocks_.push_back(std::move(blk));
   }
   const auto head_out = static_cast< std::size_t >(space.head_size());
   action_head_.fc = Linear::create(params_, "decoder.action_head.fc", d, d, rng);
   action_head_.ln = LayerNorm::create(params_, "decoder.action_head.ln", d);
   action_head_.out = Linear::create(params_, "decoder.action_head.out", d, head_out, rng, config_.output_gain);
   next_agent_head_.fc = Linear::create(params_, "decoder.next_agent_head.fc", d, d, rng);
   next_agent_head_.ln = LayerNorm::create(params_, "decoder.next_agent_head.ln", d);
   next_agent_head_.out =
      Linear::create(params_, "decoder.next_agent_head.out", d, n, rng, config_.output_gain);
   if(space.kind == ActionKind::continuous) {
      log_std_ = params_.create(
         "decoder.log_std", Shape{static_cast< std::size_t >(space.dim)},
         std::vector< double >(static_cast< std::size_t >(space.dim), 0.0)
      );
   }
}

std::vector< Tensor > TransformerActorCritic::encoder_parameters() const {
   return params_.tensors_with_prefix("encoder.");
}

std::vector< Tensor > TransformerActorCritic::decoder_parameters() const {
   return params_.tensors_with_prefix("decoder.");
}

EncoderOutput TransformerActorCritic::encode(const Tensor& obs) const {
   if(obs.rank() != 3 || obs.dim(1) != static_cast< std::size_t >(config_.n_agents)
      || obs.dim(2) != static_cast< std::size_t >(config_.obs_dim)) {
      throw InvalidArgument(
         "encode: expected observations [B, " + std::to_string(config_.n_agents) + ", "
         + std::to_string(config_.obs_dim) + "], got " + shape_string(obs.shape())
      );
   }
   const auto batch = obs.dim(0);
   const auto n = obs.dim(1);
   const AttentionMask mask =
      config_.encoder_attention == EncoderAttention::full ? AttentionMask::none : AttentionMask::diagonal;
   Tensor x = enc_ln_(gelu(obs_embed_(obs_ln_(obs))));
   for(const auto& blk : enc_blocks_) {
      x = blk.ln1(x + blk.attn(x, x, mask));
      x = blk.ln2(x + blk.fc2(gelu(blk.fc1(x))));
   }
   Tensor values = reshape(value_head_(x), Shape{batch, n});
   return {x, values};
}

EncoderOutput TransformerActorCritic::encode(const JointObservation& obs) const {
   if(obs.size() != static_cast< std::size_t >(config_.n_agents)) {
      throw InvalidArgument("encode: observation count differs from n_agents");
   }
   std::vector< double > flat;
   for(const auto& o : obs) {
      if(o.size() != static_cast< std::size_t >(config_.obs_dim)) {
         throw InvalidArgument("encode: observation width differs from obs_dim");
      }
      flat.insert(flat.end(), o.begin(), o.end());
   }
   return encode(Tensor(Shape{1, obs.size(), static_cast< std::size_t >(config_.obs_dim)}, std::move(flat)));
}

Tensor TransformerActorCritic::embed_actions(const Tensor& prev_actions) const {
   const auto& space = config_.action_space;
   if(space.kind == ActionKind::continuous) {
      return gelu(action_embed_(prev_actions));
   }
   const auto cats = static_cast< std::size_t >(space.categories);
   const auto rows = prev_actions.numel();
   std::vector< double > one_hot(rows * cats, 0.0);
   auto a = prev_actions.data();
   for(std::size_t r = 0; r < rows; ++r) {
      const double v = a[r];
      const auto idx = static_cast< long >(v);
      if(static_cast< double >(idx) != v || idx < 0 || static_cast< std::size_t >(idx) >= cats) {
         throw InvalidArgument("decoder: discrete action " + std::to_string(v) + " out of range");
      }
      one_hot[r * cats + static_cast< std::size_t >(idx)] = 1.0;
   }
   Shape shape{prev_actions.dim(0), prev_actions.dim(1), cats};
   return gelu(action_embed_(Tensor(std::move(shape), std::move(one_hot))));
}

DecoderOutput TransformerActorCritic::decode_prefix(const Tensor& reps_swapped, const Tensor& prev_actions) const {
   const auto d = static_cast< std::size_t >(config_.hidden_dim);
   const auto width = static_cast< std::size_t >(config_.action_space.width());
   if(reps_swapped.rank() != 3 || reps_swapped.dim(2) != d) {
      throw InvalidArgument("decode: reps must be [B, L, hidden_dim]");
   }
   const auto batch = reps_swapped.dim(0);
   const auto slots = reps_swapped.dim(1);
   if(slots < 1 || slots > static_cast< std::size_t >(config_.n_agents)) {
      throw InvalidArgument("decode: slot count must be in 1..n_agents");
   }
   if(prev_actions.rank() != 3 || prev_actions.dim(0) != batch || prev_actions.dim(1) != slots - 1
      || prev_actions.dim(2) != width) {
      throw InvalidArgument(
         "decode: previous actions must be [B, L-1, width], got " + shape_string(prev_actions.shape())
      );
   }
   Tensor tokens = add(Tensor::zeros(Shape{batch, 1, d}), dummy_action_);
   if(slots > 1) {
      tokens = concat({tokens, embed_actions(prev_actions)}, 1);
   }
   Tensor x = dec_ln_(add(tokens, narrow(pos_embedding_, 0, 0, slots)));
   for(const auto& blk : dec_blocks_) {
      x = blk.ln1(x + blk.self_attn(x, x, AttentionMask::causal));
      x = blk.ln2(reps_swapped + blk.cross_attn(reps_swapped, x, AttentionMask::causal));
      x = blk.ln3(x + blk.fc2(gelu(blk.fc1(x))));
   }
   DecoderOutput out;
   out.action_out = action_head_(x);
   out.next_agent_logits = next_agent_head_(x);
   out.log_std = log_std_;
   return out;
}

DecoderOutput TransformerActorCritic::decode_parallel(const Tensor& reps_swapped, const Tensor& actions_swapped) const {
   const auto n = static_cast< std::size_t >(config_.n_agents);
   if(reps_swapped.rank() != 3 || reps_swapped.dim(1) != n) {
      throw InvalidArgument("decode_parallel: reps must cover all n decision positions");
   }
   if(actions_swapped.rank() != 3 || actions_swapped.dim(0) != reps_swapped.dim(0) || actions_swapped.dim(1) != n) {
      throw InvalidArgument("decode_parallel: actions must be [B, n, width]");
   }
   return decode_prefix(reps_swapped, narrow(actions_swapped, 1, 0, n - 1));
}

DualPolicyOutput TransformerActorCritic::decode_step(
   const Tensor& reps_swapped,
   std::span< const double > action_prefix,
   int m
) const {
   const int n = config_.n_agents;
   if(m < 1 || m > n) {
      throw InvalidArgument("decode_step: m must lie in 1..n");
   }
   const auto d = static_cast< std::size_t >(config_.hidden_dim);
   const auto width = static_cast< std::size_t >(config_.action_space.width());
   Tensor reps = reps_swapped.rank() == 2 ? reshape(reps_swapped, Shape{1, reps_swapped.dim(0), d}) : reps_swapped;
   if(reps.rank() != 3 || reps.dim(0) != 1 || reps.dim(1) < static_cast< std::size_t >(m) || reps.dim(2) != d) {
      throw InvalidArgument("decode_step: reps must be [n, d] or [1, n, d]");
   }
   const auto prefix_len = static_cast< std::size_t >(m - 1);
   if(action_prefix.size() != prefix_len * width) {
      throw InvalidArgument("decode_step: action prefix must hold m-1 actions");
   }
   Tensor prev(Shape{1, prefix_len, width}, std::vector< double >(action_prefix.begin(), action_prefix.end()));
   DecoderOutput full = decode_prefix(narrow(reps, 1, 0, static_cast< std::size_t >(m)), prev);

   DualPolicyOutput out;
   out.kind = config_.action_space.kind;
   const auto head = static_cast< std::size_t >(config_.action_space.head_size());
   const auto slot = prefix_len;
   auto a = full.action_out.data();
   if(out.kind == ActionKind::discrete) {
      Tensor logits(Shape{head}, std::vector< double >(a.begin() + static_cast< std::ptrdiff_t >(slot * head), a.begin() + static_cast< std::ptrdiff_t >((slot + 1) * head)));
      const Tensor probs = softmax(logits);
      out.action_probs.assign(probs.data().begin(), probs.data().end());
   } else {
      out.action_mean.assign(a.begin() + static_cast< std::ptrdiff_t >(slot * head), a.begin() + static_cast< std::ptrdiff_t >((slot + 1) * head));
      for(double ls : full.log_std.data()) {
         out.action_std.push_back(std::exp(ls));
      }
   }
   auto nl = full.next_agent_logits.data();
   const auto nn = static_cast< std::size_t >(n);
   out.next_agent_logits.assign(nl.begin() + static_cast< std::ptrdiff_t >(slot * nn), nl.begin() + static_cast< std::ptrdiff_t >((slot + 1) * nn));
   return out;
}

}  // namespace ordermat
