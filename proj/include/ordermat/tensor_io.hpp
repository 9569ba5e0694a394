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

#ifndef ORDERMAT_TENSOR_IO_HPP
#define ORDERMAT_TENSOR_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/tensor.hpp"

namespace ordermat {

struct NamedArray {
   std::string name;
   Shape shape;
   std::vector< double > data;
};

/**
 * Writes `<base>.bin` and `<base>.json`.
 *
 * The binary file holds, for each array sorted by name, a little-endian
 * uint64 element count followed by that many float64 values. The manifest
 * lists name, shape, byte offset of the count word and element count, plus
 * a free-form "meta" object.
 */
void write_named_arrays(
   const std::filesystem::path& base,
   std::vector< NamedArray > arrays,
   const nlohmann::json& meta = nlohmann::json::object()
);

struct NamedArrayFile {
   std::vector< NamedArray > arrays;  // sorted by name
   nlohmann::json meta;
};

/// Throws IoError on missing files, truncation or manifest mismatch.
NamedArrayFile read_named_arrays(const std::filesystem::path& base);

/// Checkpoint of a network: its parameters plus the NetConfig under meta.
void save_checkpoint(
   const std::filesystem::path& base,
   const TransformerActorCritic& net,
   const nlohmann::json& extra_meta = nlohmann::json::object()
);
TransformerActorCritic load_checkpoint(const std::filesystem::path& base);

/// Accepts either the base path or a path ending in .bin / .json.
std::filesystem::path checkpoint_base(const std::filesystem::path& path);

}  // namespace ordermat

#endif  // ORDERMAT_TENSOR_IO_HPP
