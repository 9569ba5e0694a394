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

#include "ordermat/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace ordermat {

double standard_normal(Rng& rng) {
   double u1 = uniform01(rng);
   while(u1 <= 0.0) {
      u1 = uniform01(rng);
   }
   const double u2 = uniform01(rng);
   return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector< int > random_permutation(Rng& rng, int n) {
   std::vector< int > perm(static_cast< std::size_t >(n));
   for(int i = 0; i < n; ++i) {
      perm[static_cast< std::size_t >(i)] = i;
   }
   for(int i = n - 1; i > 0; --i) {
      auto j = uniform_index(rng, static_cast< std::size_t >(i + 1));
      std::swap(perm[static_cast< std::size_t >(i)], perm[j]);
   }
   return perm;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
   // splitmix64 finalizer
   std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
   z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
   return z ^ (z >> 31);
}

}  // namespace ordermat
