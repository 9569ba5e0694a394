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

#include "ordermat/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ordermat/errors.hpp"

namespace ordermat {

namespace {

constexpr const char* kFormat = "ordermat-arrays/1";

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
   return std::filesystem::path(base.string() + suffix);
}

}  // namespace

std::filesystem::path checkpoint_base(const std::filesystem::path& path) {
   const auto ext = path.extension().string();
   if(ext == ".bin" || ext == ".json") {
      return path.parent_path() / path.stem();
   }
   return path;
}

void write_named_arrays(const std::filesystem::path& base, std::vector< NamedArray > arrays, const nlohmann::json& meta) {
   std::sort(arrays.begin(), arrays.end(), [](const NamedArray& a, const NamedArray& b) { return a.name < b.name; });
   for(std::size_t i = 1; i < arrays.size(); ++i) {
      if(arrays[i].name == arrays[i - 1].name) {
         throw InvalidArgument("duplicate array name: " + arrays[i].name);
      }
   }
   if(base.has_parent_path()) {
      std::filesystem::create_directories(base.parent_path());
   }
   std::ofstream bin(with_suffix(base, ".bin"), std::ios::binary | std::ios::trunc);
   if(! bin) {
      throw IoError("cannot open " + with_suffix(base, ".bin").string() + " for writing");
   }
   nlohmann::json entries = nlohmann::json::array();
   std::uint64_t offset = 0;
   for(const auto& a : arrays) {
      if(shape_numel(a.shape) != a.data.size()) {
         throw InvalidArgument("array " + a.name + ": shape does not match data length");
      }
      const std::uint64_t count = a.data.size();
      bin.write(reinterpret_cast< const char* >(&count), sizeof(count));
      bin.write(reinterpret_cast< const char* >(a.data.data()), static_cast< std::streamsize >(count * sizeof(double)));
      entries.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", count}});
      offset += sizeof(count) + count * sizeof(double);
   }
   if(! bin) {
      throw IoError("write failed: " + with_suffix(base, ".bin").string());
   }
   nlohmann::json manifest = {{"format", kFormat}, {"bytes", offset}, {"arrays", entries}, {"meta", meta}};
   std::ofstream js(with_suffix(base, ".json"), std::ios::trunc);
   if(! js) {
      throw IoError("cannot open " + with_suffix(base, ".json").string() + " for writing");
   }
   js << manifest.dump(2) << '\n';
   if(! js) {
      throw IoError("write failed: " + with_suffix(base, ".json").string());
   }
}

NamedArrayFile read_named_arrays(const std::filesystem::path& base) {
   std::ifstream js(with_suffix(base, ".json"));
   if(! js) {
      throw IoError("missing manifest " + with_suffix(base, ".json").string());
   }
   nlohmann::json manifest;
   try {
      js >> manifest;
   } catch(const nlohmann::json::exception& e) {
      throw IoError("malformed manifest: " + std::string(e.what()));
   }
   if(manifest.value("format", std::string()) != kFormat) {
      throw IoError("unrecognized manifest format in " + with_suffix(base, ".json").string());
   }
   std::ifstream bin(with_suffix(base, ".bin"), std::ios::binary);
   if(! bin) {
      throw IoError("missing data file " + with_suffix(base, ".bin").string());
   }
   std::vector< char > bytes((std::istreambuf_iterator< char >(bin)), std::istreambuf_iterator< char >());
   if(bytes.size() != manifest.at("bytes").get< std::uint64_t >()) {
      throw IoError("data file size differs from manifest");
   }
   NamedArrayFile out;
   out.meta = manifest.value("meta", nlohmann::json::object());
   for(const auto& e : manifest.at("arrays")) {
      NamedArray a;
      a.name = e.at("name").get< std::string >();
      a.shape = e.at("shape").get< Shape >();
      const auto offset = e.at("offset").get< std::uint64_t >();
      const auto count = e.at("count").get< std::uint64_t >();
      if(offset + sizeof(std::uint64_t) + count * sizeof(double) > bytes.size() || shape_numel(a.shape) != count) {
         throw IoError("manifest entry " + a.name + " is inconsistent with the data file");
      }
      std::uint64_t stored = 0;
      std::memcpy(&stored, bytes.data() + offset, sizeof(stored));
      if(stored != count) {
         throw IoError("length prefix mismatch for " + a.name);
      }
      a.data.resize(count);
      std::memcpy(a.data.data(), bytes.data() + offset + sizeof(stored), count * sizeof(double));
      out.arrays.push_back(std::move(a));
   }
   return out;
}

void save_checkpoint(const std::filesystem::path& base, const TransformerActorCritic& net, const nlohmann::json& extra_meta) {
   std::vector< NamedArray > arrays;
   const auto& params = net.parameters();
   for(const auto& name : params.names()) {
      const Tensor t = params.get(name);
      arrays.push_back({name, t.shape(), std::vector< double >(t.data().begin(), t.data().end())});
   }
   nlohmann::json meta = extra_meta;
   meta["net_config"] = to_json(net.config());
   write_named_arrays(base, std::move(arrays), meta);
}

TransformerActorCritic load_checkpoint(const std::filesystem::path& base) {
   auto file = read_named_arrays(base);
   if(! file.meta.contains("net_config")) {
      throw IoError("checkpoint manifest has no net_config");
   }
   TransformerActorCritic net(net_config_from_json(file.meta.at("net_config")), 0);
   auto& params = net.parameters();
   if(file.arrays.size() != params.size()) {
      throw IoError("checkpoint holds " + std::to_string(file.arrays.size()) + " tensors, network expects "
                    + std::to_string(params.size()));
   }
   for(const auto& a : file.arrays) {
      if(! params.contains(a.name) || params.get(a.name).shape() != a.shape) {
         throw IoError("checkpoint tensor " + a.name + " does not fit the network");
      }
      params.set_values(a.name, a.data);
   }
   return net;
}

}  // namespace ordermat
