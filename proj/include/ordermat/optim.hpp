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

#ifndef ORDERMAT_OPTIM_HPP
#define ORDERMAT_OPTIM_HPP

#include <functional>
#include <span>
#include <vector>

#include "ordermat/tensor.hpp"

namespace ordermat {

struct AdamOptions {
   double lr = 5e-4;
   double beta1 = 0.9;
   double beta2 = 0.999;
   double eps = 1e-5;
};

/// Adam over a fixed list of leaf tensors. Moment buffers live here, so the
/// parameter list must not change between steps.
class Adam {
  public:
   Adam(std::vector< Tensor > params, AdamOptions options);

   void step();
   void zero_grad();

   [[nodiscard]] const AdamOptions& options() const { return options_; }
   [[nodiscard]] long steps_taken() const { return t_; }

  private:
   std::vector< Tensor > params_;
   AdamOptions options_;
   std::vector< std::vector< double > > m_;
   std::vector< std::vector< double > > v_;
   long t_ = 0;
};

/// Rescale all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the factor applied (1 when already within bounds).
double clip_global_norm(std::span< Tensor > params, double max_norm);

/// L2 norm over the gradients of all tensors.
double global_grad_norm(std::span< const Tensor > params);

/// Maximum relative error between backward() gradients of `f` and central
/// differences with step `h`, over every element of `params`:
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double finite_diff_check(
   const std::function< Tensor() >& f,
   std::span< Tensor > params,
   double h = 1e-5
);

}  // namespace ordermat

#endif  // ORDERMAT_OPTIM_HPP
