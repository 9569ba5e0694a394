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

#include "ordermat/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ordermat {

Tensor ParameterSet::create(const std::string& name, Shape shape, std::vector< double > values) {
   if(params_.contains(name)) {
      throw InvalidArgument("duplicate parameter name: " + name);
   }
   Tensor t(std::move(shape), std::move(values), true);
   params_.emplace(name, t);
   return t;
}

Tensor ParameterSet::get(const std::string& name) const {
   auto it = params_.find(name);
   if(it == params_.end()) {
      throw InvalidArgument("unknown parameter: " + name);
   }
   return it->second;
}

std::vector< std::string > ParameterSet::names() const {
   std::vector< std::string > out;
   out.reserve(params_.size());
   for(const auto& [name, _] : params_) {
      out.push_back(name);
   }
   return out;
}

std::vector< Tensor > ParameterSet::tensors() const {
   std::vector< Tensor > out;
   out.reserve(params_.size());
   for(const auto& [_, t] : params_) {
      out.push_back(t);
   }
   return out;
}

std::vector< Tensor > ParameterSet::tensors_with_prefix(const std::string& prefix) const {
   std::vector< Tensor > out;
   for(const auto& [name, t] : params_) {
      if(name.starts_with(prefix)) {
         out.push_back(t);
      }
   }
   return out;
}

std::size_t ParameterSet::numel() const {
   std::size_t n = 0;
   for(const auto& [_, t] : params_) {
      n += t.numel();
   }
   return n;
}

void ParameterSet::zero_grad() {
   for(auto& [_, t] : params_) {
      t.zero_grad();
   }
}

void ParameterSet::assign(const ParameterSet& other) {
   if(other.names() != names()) {
      throw InvalidArgument("parameter sets have different names");
   }
   for(auto& [name, t] : params_) {
      set_values(name, other.get(name).data());
   }
}

void ParameterSet::set_values(const std::string& name, std::span< const double > values) {
   auto t = get(name);
   auto dst = t.mutable_data();
   if(dst.size() != values.size()) {
      throw InvalidArgument("size mismatch while setting parameter " + name);
   }
   for(double v : values) {
      if(! std::isfinite(v)) {
         throw NumericError("non-finite value for parameter " + name);
      }
   }
   std::copy(values.begin(), values.end(), dst.begin());
}

std::vector< double > fan_in_uniform(std::size_t fan_in, std::size_t count, double gain, Rng& rng) {
   const double bound = gain / std::sqrt(static_cast< double >(std::max< std::size_t >(fan_in, 1)));
   std::vector< double > out(count);
   for(auto& v : out) {
      v = uniform(rng, -bound, bound);
   }
   return out;
}

Linear Linear::create(
   ParameterSet& params,
   const std::string& name,
   std::size_t in,
   std::size_t out,
   Rng& rng,
   double gain,
   bool with_bias
) {
   Linear layer;
   layer.weight = params.create(name + ".weight", Shape{in, out}, fan_in_uniform(in, in * out, gain, rng));
   if(with_bias) {
      layer.bias = params.create(name + ".bias", Shape{out}, std::vector< double >(out, 0.0));
   }
   return layer;
}

Tensor Linear::operator()(const Tensor& x) const {
   Tensor y = matmul(x, weight);
   return bias.defined() ? add(y, bias) : y;
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, std::size_t dim) {
   LayerNorm ln;
   ln.gain = params.create(name + ".gain", Shape{dim}, std::vector< double >(dim, 1.0));
   ln.bias = params.create(name + ".bias", Shape{dim}, std::vector< double >(dim, 0.0));
   return ln;
}

MultiHeadAttention MultiHeadAttention::create(
   ParameterSet& params,
   const std::string& name,
   std::size_t dim,
   std::size_t heads,
   Rng& rng
) {
   if(heads == 0 || dim % heads != 0) {
      throw InvalidArgument("attention: hidden dim must be divisible by the head count");
   }
   const std::size_t head_dim = dim / heads;
   MultiHeadAttention attn;
   for(std::size_t h = 0; h < heads; ++h) {
      const std::string tag = ".h" + std::to_string(h);
      attn.query.push_back(Linear::create(params, name + ".query" + tag, dim, head_dim, rng));
      attn.key.push_back(Linear::create(params, name + ".key" + tag, dim, head_dim, rng));
      attn.value.push_back(Linear::create(params, name + ".value" + tag, dim, head_dim, rng));
   }
   attn.proj = Linear::create(params, name + ".proj", dim, dim, rng);
   return attn;
}

Tensor MultiHeadAttention::operator()(const Tensor& q_src, const Tensor& kv_src, AttentionMask mask)
   const {
   if(q_src.rank() != 3 || kv_src.rank() != 3 || q_src.dim(0) != kv_src.dim(0)) {
      throw InvalidArgument("attention: expects [B, L, d] inputs with equal batch");
   }
   const std::size_t batch = q_src.dim(0);
   const std::size_t lq = q_src.dim(1);
   const std::size_t lk = kv_src.dim(1);
   std::vector< std::uint8_t > blocked;
   if(mask != AttentionMask::none) {
      blocked.assign(batch * lq * lk, 0);
      for(std::size_t b = 0; b < batch; ++b) {
         for(std::size_t i = 0; i < lq; ++i) {
            for(std::size_t j = 0; j < lk; ++j) {
               bool hide = mask == AttentionMask::causal ? j > i : j != i;
               blocked[(b * lq + i) * lk + j] = hide ? 1 : 0;
            }
         }
      }
   }
   std::vector< Tensor > heads;
   for(std::size_t h = 0; h < query.size(); ++h) {
      Tensor q = query[h](q_src);
      Tensor k = key[h](kv_src);
      Tensor v = value[h](kv_src);
      const double inv_sqrt = 1.0 / std::sqrt(static_cast< double >(q.dim(-1)));
      Tensor scores = scale(bmm(q, transpose(k)), inv_sqrt);
      if(! blocked.empty()) {
         scores = mask_fill(scores, blocked, kMaskedLogit);
      }
      heads.push_back(bmm(softmax(scores), v));
   }
   Tensor joined = heads.size() == 1 ? heads[0] : concat(heads, -1);
   return proj(joined);
}

Tensor categorical_log_prob(const Tensor& logits, std::span< const int > index) {
   return gather_last(log_softmax(logits), index);
}

Tensor categorical_entropy(const Tensor& logits) {
   return -sum_last(softmax(logits) * log_softmax(logits));
}

Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& x) {
   const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
   Tensor z = subtract(x, mean) * exp(-log_std);
   Tensor per_dim = add(scale(square(z), -0.5), -log_std);
   return add_scalar(sum_last(per_dim), -half_log_2pi * static_cast< double >(log_std.numel()));
}

Tensor gaussian_entropy(const Tensor& log_std) {
   const double per_dim = 0.5 + 0.5 * std::log(2.0 * std::numbers::pi);
   return add_scalar(sum(log_std), per_dim * static_cast< double >(log_std.numel()));
}

}  // namespace ordermat
