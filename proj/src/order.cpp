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

#include "ordermat/order.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ordermat {

bool is_permutation_of_range(std::span< const int > order) {
   std::vector< bool > seen(order.size(), false);
   for(int v : order) {
      if(v < 0 || static_cast< std::size_t >(v) >= order.size() || seen[static_cast< std::size_t >(v)]) {
         return false;
      }
      seen[static_cast< std::size_t >(v)] = true;
   }
   return true;
}

DecisionOrder::DecisionOrder(std::vector< int > order) : order_(std::move(order)) {
   if(order_.empty() || ! is_permutation_of_range(order_)) {
      throw InvalidArgument("decision order is not a permutation of 0..n-1");
   }
}

DecisionOrder DecisionOrder::identity(int n) {
   std::vector< int > v(static_cast< std::size_t >(n));
   for(int i = 0; i < n; ++i) {
      v[static_cast< std::size_t >(i)] = i;
   }
   return DecisionOrder(std::move(v));
}

DecisionOrder DecisionOrder::reversed(int n) {
   std::vector< int > v(static_cast< std::size_t >(n));
   for(int i = 0; i < n; ++i) {
      v[static_cast< std::size_t >(i)] = n - 1 - i;
   }
   return DecisionOrder(std::move(v));
}

std::vector< int > DecisionOrder::positions() const {
   std::vector< int > pos(order_.size());
   for(std::size_t k = 0; k < order_.size(); ++k) {
      pos[static_cast< std::size_t >(order_[k])] = static_cast< int >(k);
   }
   return pos;
}

void DecisionOrder::require_lead(int lead) const {
   if(order_.front() != lead) {
      throw InvalidArgument(
         "decision order starts with agent " + std::to_string(order_.front()) + ", lead agent is "
         + std::to_string(lead)
      );
   }
}

std::vector< double > swap_rows_by_order(std::span< const double > flat, std::size_t width, const DecisionOrder& ao) {
   const auto n = static_cast< std::size_t >(ao.size());
   if(flat.size() != n * width) {
      throw InvalidArgument("swap: block length differs from order length");
   }
   std::vector< double > out(flat.size());
   for(std::size_t k = 0; k < n; ++k) {
      auto src = static_cast< std::size_t >(ao[k]);
      std::copy_n(flat.begin() + static_cast< std::ptrdiff_t >(src * width), width, out.begin() + static_cast< std::ptrdiff_t >(k * width));
   }
   return out;
}

std::vector< double > restore_rows_by_order(std::span< const double > flat, std::size_t width, const DecisionOrder& ao) {
   const auto n = static_cast< std::size_t >(ao.size());
   if(flat.size() != n * width) {
      throw InvalidArgument("restore: block length differs from order length");
   }
   std::vector< double > out(flat.size());
   for(std::size_t k = 0; k < n; ++k) {
      auto dst = static_cast< std::size_t >(ao[k]);
      std::copy_n(flat.begin() + static_cast< std::ptrdiff_t >(k * width), width, out.begin() + static_cast< std::ptrdiff_t >(dst * width));
   }
   return out;
}

std::vector< double > masked_softmax(std::span< const double > logits, std::span< const std::uint8_t > chosen) {
   if(logits.size() != chosen.size()) {
      throw InvalidArgument("masked_softmax: logits and mask lengths differ");
   }
   double mx = -std::numeric_limits< double >::infinity();
   for(std::size_t i = 0; i < logits.size(); ++i) {
      if(! chosen[i]) {
         mx = std::max(mx, logits[i]);
      }
   }
   std::vector< double > p(logits.size(), 0.0);
   if(! std::isfinite(mx)) {
      return p;
   }
   double z = 0.0;
   for(std::size_t i = 0; i < logits.size(); ++i) {
      if(! chosen[i]) {
         p[i] = std::exp(logits[i] - mx);
         z += p[i];
      }
   }
   for(auto& v : p) {
      v /= z;
   }
   return p;
}

NextAgentChoice mask_and_sample_next(
   std::span< const double > logits,
   std::span< const std::uint8_t > chosen,
   SelectMode mode,
   Rng& rng
) {
   if(logits.size() != chosen.size()) {
      throw InvalidArgument("mask_and_sample_next: logits and mask lengths differ");
   }
   if(std::all_of(chosen.begin(), chosen.end(), [](std::uint8_t c) { return c != 0; })) {
      throw InvalidState("mask_and_sample_next: every agent has already been chosen");
   }
   NextAgentChoice out;
   out.probs = masked_softmax(logits, chosen);
   if(mode == SelectMode::greedy) {
      for(std::size_t i = 0; i < logits.size(); ++i) {
         if(! chosen[i] && (out.agent < 0 || logits[i] > logits[static_cast< std::size_t >(out.agent)])) {
            out.agent = static_cast< int >(i);
         }
      }
   } else {
      const double u = uniform01(rng);
      double acc = 0.0;
      for(std::size_t i = 0; i < logits.size(); ++i) {
         if(chosen[i]) {
            continue;
         }
         out.agent = static_cast< int >(i);
         acc += out.probs[i];
         if(u < acc) {
            break;
         }
      }
   }
   for(double p : out.probs) {
      if(p > 0.0) {
         out.entropy -= p * std::log(p);
      }
   }
   out.log_prob = std::log(out.probs[static_cast< std::size_t >(out.agent)]);
   return out;
}

OrderStrategy OrderStrategy::parse(const std::string& text) {
   OrderStrategy s;
   if(text == "learned") {
      s.kind = Kind::learned;
   } else if(text == "sorted") {
      s.kind = Kind::sorted;
   } else if(text == "inverse") {
      s.kind = Kind::inverse;
   } else if(text == "episode_shuffle" || text == "ep_shuffle") {
      s.kind = Kind::episode_shuffle;
   } else if(text == "step_shuffle" || text == "st_shuffle") {
      s.kind = Kind::step_shuffle;
   } else if(text.starts_with("fixed:")) {
      s.kind = Kind::fixed;
      std::stringstream ss(text.substr(6));
      std::string item;
      while(std::getline(ss, item, ',')) {
         try {
            s.fixed_order.push_back(std::stoi(item));
         } catch(const std::exception&) {
            throw InvalidArgument("bad fixed order entry: '" + item + "'");
         }
      }
      if(! is_permutation_of_range(s.fixed_order) || s.fixed_order.empty()) {
         throw InvalidArgument("fixed order is not a permutation: " + text);
      }
   } else {
      throw InvalidArgument("unknown order strategy: " + text);
   }
   return s;
}

std::string OrderStrategy::name() const {
   switch(kind) {
      case Kind::learned: return "learned";
      case Kind::sorted: return "sorted";
      case Kind::inverse: return "inverse";
      case Kind::episode_shuffle: return "episode_shuffle";
      case Kind::step_shuffle: return "step_shuffle";
      case Kind::fixed: {
         std::string out = "fixed:";
         for(std::size_t i = 0; i < fixed_order.size(); ++i) {
            out += (i ? "," : "") + std::to_string(fixed_order[i]);
         }
         return out;
      }
   }
   return "unknown";
}

void OrderStrategy::validate(int n_agents, int lead_agent) const {
   if(lead_agent < 0 || lead_agent >= n_agents) {
      throw InvalidArgument("lead agent out of range");
   }
   if(kind == Kind::fixed) {
      if(static_cast< int >(fixed_order.size()) != n_agents) {
         throw InvalidArgument("fixed order length differs from agent count");
      }
      DecisionOrder(fixed_order).require_lead(lead_agent);
   }
}

OrderSchedule::OrderSchedule(OrderStrategy strategy, int n_agents, int lead_agent)
    : strategy_(std::move(strategy)), n_(n_agents), lead_(lead_agent) {
   strategy_.validate(n_agents, lead_agent);
}

void OrderSchedule::begin_episode(Rng& episode_rng) {
   if(strategy_.kind == OrderStrategy::Kind::episode_shuffle) {
      episode_order_ = DecisionOrder(random_permutation(episode_rng, n_));
   }
}

std::optional< DecisionOrder > OrderSchedule::next_order(Rng& step_rng) {
   switch(strategy_.kind) {
      case OrderStrategy::Kind::learned: return std::nullopt;
      case OrderStrategy::Kind::sorted: return DecisionOrder::identity(n_);
      case OrderStrategy::Kind::inverse: return DecisionOrder::reversed(n_);
      case OrderStrategy::Kind::fixed: return DecisionOrder(strategy_.fixed_order);
      case OrderStrategy::Kind::step_shuffle: return DecisionOrder(random_permutation(step_rng, n_));
      case OrderStrategy::Kind::episode_shuffle:
         if(! episode_order_) {
            throw InvalidState("episode_shuffle: begin_episode() was not called");
         }
         return episode_order_;
   }
   return std::nullopt;
}

}  // namespace ordermat
