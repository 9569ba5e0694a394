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

#ifndef ORDERMAT_ORDER_HPP
#define ORDERMAT_ORDER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordermat/errors.hpp"
#include "ordermat/rng.hpp"

namespace ordermat {

/**
 * The order in which agents commit actions within one timestep.
 *
 * order[k] is the canonical index of the k-th agent to decide. Every
 * sequence that the decoder consumes is laid out by decision position:
 * swap_by_order() maps canonical -> decision layout, restore_by_order() maps
 * back. Nothing else in the code base permutes agent data.
 */
class DecisionOrder {
  public:
   DecisionOrder() = default;
   /// Throws InvalidArgument unless `order` is a permutation of 0..n-1.
   explicit DecisionOrder(std::vector< int > order);

   static DecisionOrder identity(int n);
   static DecisionOrder reversed(int n);

   [[nodiscard]] int size() const { return static_cast< int >(order_.size()); }
   [[nodiscard]] int operator[](std::size_t k) const { return order_[k]; }
   [[nodiscard]] int lead() const { return order_.front(); }
   [[nodiscard]] const std::vector< int >& indices() const { return order_; }
   /// positions()[agent] = decision position of `agent`.
   [[nodiscard]] std::vector< int > positions() const;

   /// Throws InvalidArgument when order[0] != lead.
   void require_lead(int lead) const;

   bool operator==(const DecisionOrder&) const = default;

  private:
   std::vector< int > order_;
};

/// True when `order` is a permutation of 0..n-1.
bool is_permutation_of_range(std::span< const int > order);

/// result[k] = seq[ao[k]].
template < typename T >
std::vector< T > swap_by_order(std::span< const T > seq, const DecisionOrder& ao) {
   if(seq.size() != static_cast< std::size_t >(ao.size())) {
      throw InvalidArgument("swap: sequence length differs from order length");
   }
   std::vector< T > out;
   out.reserve(seq.size());
   for(int agent : ao.indices()) {
      out.push_back(seq[static_cast< std::size_t >(agent)]);
   }
   return out;
}

/// result[ao[k]] = seq[k]; exact inverse of swap_by_order.
template < typename T >
std::vector< T > restore_by_order(std::span< const T > seq, const DecisionOrder& ao) {
   if(seq.size() != static_cast< std::size_t >(ao.size())) {
      throw InvalidArgument("restore: sequence length differs from order length");
   }
   std::vector< T > out(seq.size());
   for(std::size_t k = 0; k < seq.size(); ++k) {
      out[static_cast< std::size_t >(ao[k])] = seq[k];
   }
   return out;
}

template < typename T >
std::vector< T > swap_by_order(const std::vector< T >& seq, const DecisionOrder& ao) {
   return swap_by_order(std::span< const T >(seq), ao);
}

template < typename T >
std::vector< T > restore_by_order(const std::vector< T >& seq, const DecisionOrder& ao) {
   return restore_by_order(std::span< const T >(seq), ao);
}

/// Row-block variants: `flat` holds n rows of `width` values each.
std::vector< double > swap_rows_by_order(std::span< const double > flat, std::size_t width, const DecisionOrder& ao);
std::vector< double > restore_rows_by_order(std::span< const double > flat, std::size_t width, const DecisionOrder& ao);

enum class SelectMode { sample, greedy };

struct NextAgentChoice {
   int agent = -1;
   double log_prob = 0.0;
   /// Entropy of the masked distribution.
   double entropy = 0.0;
   std::vector< double > probs;
};

/// softmax over the entries with chosen[i] == 0; chosen entries get exactly 0.
std::vector< double > masked_softmax(std::span< const double > logits, std::span< const std::uint8_t > chosen);

/// Pick the next agent among those not yet chosen. Greedy mode is argmax
/// with ties to the lowest index. Throws InvalidState when every agent has
/// already been chosen.
NextAgentChoice mask_and_sample_next(
   std::span< const double > logits,
   std::span< const std::uint8_t > chosen,
   SelectMode mode,
   Rng& rng
);

struct OrderStrategy {
   enum class Kind { learned, sorted, inverse, episode_shuffle, step_shuffle, fixed };

   Kind kind = Kind::learned;
   std::vector< int > fixed_order;  // payload for Kind::fixed

   /// Accepts learned, sorted, inverse, episode_shuffle (ep_shuffle),
   /// step_shuffle (st_shuffle) and fixed:i,j,k.
   static OrderStrategy parse(const std::string& text);
   [[nodiscard]] std::string name() const;
   [[nodiscard]] bool is_learned() const { return kind == Kind::learned; }
   /// Throws InvalidArgument when a fixed payload is not a valid order for
   /// n agents with the given lead.
   void validate(int n_agents, int lead_agent) const;
};

/**
 * Produces per-step decision orders for the non-learned strategies and keeps
 * per-episode state for episode_shuffle. For the learned strategy
 * next_order() returns nullopt: the order is assembled during decoding from
 * the lead agent and the next-agent head.
 */
class OrderSchedule {
  public:
   OrderSchedule(OrderStrategy strategy, int n_agents, int lead_agent);

   void begin_episode(Rng& episode_rng);
   std::optional< DecisionOrder > next_order(Rng& step_rng);

   [[nodiscard]] const OrderStrategy& strategy() const { return strategy_; }
   [[nodiscard]] int lead_agent() const { return lead_; }
   [[nodiscard]] int n_agents() const { return n_; }

  private:
   OrderStrategy strategy_;
   int n_;
   int lead_;
   std::optional< DecisionOrder > episode_order_;
};

}  // namespace ordermat

#endif  // ORDERMAT_ORDER_HPP
