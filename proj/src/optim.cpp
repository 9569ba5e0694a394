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

#include "ordermat/optim.hpp"

#include <algorithm>
#include <cmath>

namespace ordermat {

Adam::Adam(std::vector< Tensor > params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
   if(options_.lr <= 0.0 || options_.eps <= 0.0) {
      throw InvalidArgument("Adam: lr and eps must be positive");
   }
   for(const auto& p : params_) {
      if(! p.is_leaf()) {
         throw InvalidArgument("Adam: parameters must be leaf tensors");
      }
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
   }
}

void Adam::step() {
   ++t_;
   const double b1 = options_.beta1;
   const double b2 = options_.beta2;
   const double c1 = 1.0 - std::pow(b1, static_cast< double >(t_));
   const double c2 = 1.0 - std::pow(b2, static_cast< double >(t_));
   for(std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if(! p.has_grad()) {
         continue;
      }
      auto w = p.mutable_data();
      auto g = p.mutable_grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for(std::size_t i = 0; i < w.size(); ++i) {
         m[i] = b1 * m[i] + (1.0 - b1) * g[i];
         v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
         double mhat = m[i] / c1;
         double vhat = v[i] / c2;
         w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
      }
   }
}

void Adam::zero_grad() {
   for(auto& p : params_) {
      p.zero_grad();
   }
}

double global_grad_norm(std::span< const Tensor > params) {
   double sq = 0.0;
   for(const auto& p : params) {
      if(! p.has_grad()) {
         continue;
      }
      for(double g : p.grad()) {
         sq += g * g;
      }
   }
   return std::sqrt(sq);
}

double clip_global_norm(std::span< Tensor > params, double max_norm) {
   if(! (max_norm > 0.0)) {
      throw InvalidArgument("clip_global_norm: max_norm must be positive");
   }
   std::vector< Tensor > view(params.begin(), params.end());
   const double norm = global_grad_norm(view);
   if(norm <= max_norm) {
      return 1.0;
   }
   const double factor = max_norm / norm;
   for(auto& p : params) {
      if(! p.has_grad()) {
         continue;
      }
      for(double& g : p.mutable_grad()) {
         g *= factor;
      }
   }
   return factor;
}

double finite_diff_check(const std::function< Tensor() >& f, std::span< Tensor > params, double h) {
   for(auto& p : params) {
      p.zero_grad();
   }
   f().backward();
   std::vector< std::vector< double > > analytic;
   analytic.reserve(params.size());
   for(const auto& p : params) {
      analytic.push_back(p.grad());
   }

   NoGradGuard no_grad;
   double worst = 0.0;
   for(std::size_t k = 0; k < params.size(); ++k) {
      auto w = params[k].mutable_data();
      for(std::size_t i = 0; i < w.size(); ++i) {
         const double saved = w[i];
         w[i] = saved + h;
         const double up = f().item();
         w[i] = saved - h;
         const double down = f().item();
         w[i] = saved;
         const double numeric = (up - down) / (2.0 * h);
         const double a = analytic[k][i];
         const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
         worst = std::max(worst, err);
      }
   }
   return worst;
}

}  // namespace ordermat
