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

#ifndef ORDERMAT_NN_HPP
#define ORDERMAT_NN_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ordermat/rng.hpp"
#include "ordermat/tensor.hpp"

namespace ordermat {

/// Named trainable tensors. Iteration order is lexicographic by name, which
/// fixes the layout of checkpoints and optimizer state.
class ParameterSet {
  public:
   Tensor create(const std::string& name, Shape shape, std::vector< double > values);

   [[nodiscard]] Tensor get(const std::string& name) const;
   [[nodiscard]] bool contains(const std::string& name) const { return params_.contains(name); }
   [[nodiscard]] std::vector< std::string > names() const;
   [[nodiscard]] std::vector< Tensor > tensors() const;
   [[nodiscard]] std::vector< Tensor > tensors_with_prefix(const std::string& prefix) const;
   [[nodiscard]] std::size_t size() const { return params_.size(); }
   [[nodiscard]] std::size_t numel() const;

   void zero_grad();
   /// Overwrite values from `other`; names and shapes must match exactly.
   void assign(const ParameterSet& other);
   /// Overwrite the values of one parameter.
   void set_values(const std::string& name, std::span< const double > values);

  private:
   std::map< std::string, Tensor > params_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) scaled by `gain`.
std::vector< double > fan_in_uniform(std::size_t fan_in, std::size_t count, double gain, Rng& rng);

struct Linear {
   Tensor weight;  // [in, out]
   Tensor bias;    // [out]; undefined when bias-free

   static Linear create(
      ParameterSet& params,
      const std::string& name,
      std::size_t in,
      std::size_t out,
      Rng& rng,
      double gain = 1.0,
      bool with_bias = true
   );
   Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
   Tensor gain;
   Tensor bias;

   static LayerNorm create(ParameterSet& params, const std::string& name, std::size_t dim);
   Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

enum class AttentionMask {
   none,      // every query sees every key
   causal,    // query i sees keys 0..i
   diagonal,  // query i sees key i only
};

/// Scaled dot-product attention with one projection set per head.
struct MultiHeadAttention {
   std::vector< Linear > query;
   std::vector< Linear > key;
   std::vector< Linear > value;
   Linear proj;

   static MultiHeadAttention create(
      ParameterSet& params,
      const std::string& name,
      std::size_t dim,
      std::size_t heads,
      Rng& rng
   );
   /// q_src [B, Lq, d], kv_src [B, Lk, d] -> [B, Lq, d]
   Tensor operator()(const Tensor& q_src, const Tensor& kv_src, AttentionMask mask) const;
};

/// Logit value used for infeasible entries; exp() of it underflows to
/// exactly zero after the softmax shift.
inline constexpr double kMaskedLogit = -1e30;

/// log pi(index) under softmax(logits) along the last axis.
Tensor categorical_log_prob(const Tensor& logits, std::span< const int > index);
/// Entropy of softmax(logits) along the last axis.
Tensor categorical_entropy(const Tensor& logits);
/// Diagonal Gaussian log density summed over the last axis.
/// mean, x: [..., D]; log_std: [D].
Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& x);
/// Differential entropy of a diagonal Gaussian (scalar; independent of the mean).
Tensor gaussian_entropy(const Tensor& log_std);

}  // namespace ordermat

#endif  // ORDERMAT_NN_HPP
