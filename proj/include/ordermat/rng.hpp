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

#ifndef ORDERMAT_RNG_HPP
#define ORDERMAT_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace ordermat {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits, so the stream is
/// identical across standard libraries.
inline double uniform01(Rng& rng) {
   return static_cast< double >(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
   return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller (library-independent stream).
double standard_normal(Rng& rng);

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
   return static_cast< std::size_t >(uniform01(rng) * static_cast< double >(n));
}

/// Fisher-Yates permutation of {0, ..., n-1}.
std::vector< int > random_permutation(Rng& rng, int n);

/// Derive an independent stream seed from a base seed and a salt.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace ordermat

#endif  // ORDERMAT_RNG_HPP
