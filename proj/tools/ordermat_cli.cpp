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

// ordermat train <config.json>
// ordermat eval <checkpoint|random> <config.json>
// ordermat compare <dir>... [--out DIR]
//
// ORDERMAT_OUTPUT_DIR replaces output_dir; ORDERMAT_SEED replaces the seed list.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ordermat/errors.hpp"
#include "ordermat/experiment.hpp"

namespace {

enum ExitCode : int {
   kOk = 0,
   kInternal = 1,
   kUsage = 2,
   kIo = 3,
   kNumeric = 4,
   kProtocol = 5,
   kSeedFailed = 6,
};

ordermat::ExperimentConfig load_with_overrides(const std::string& path) {
   auto j = nlohmann::json::object();
   {
      std::ifstream in(path);
      if(! in) {
         throw ordermat::IoError("cannot read " + path);
      }
      try {
         j = nlohmann::json::parse(in);
      } catch(const nlohmann::json::exception& e) {
         throw ordermat::InvalidArgument("malformed config " + path + ": " + e.what());
      }
   }
   if(const char* dir = std::getenv("ORDERMAT_OUTPUT_DIR"); dir && *dir) {
      j["output_dir"] = dir;
   }
   if(const char* seed = std::getenv("ORDERMAT_SEED"); seed && *seed) {
      try {
         std::size_t used = 0;
         const auto value = std::stoull(seed, &used);
         if(used != std::string(seed).size()) {
            throw std::invalid_argument(seed);
         }
         j["seeds"] = {value};
      } catch(const std::exception&) {
         throw ordermat::InvalidArgument(std::string("ORDERMAT_SEED is not an unsigned integer: ") + seed);
      }
   }
   return ordermat::experiment_config_from_json(j);
}

int report(const char* category, const std::exception& e, int code) {
   std::cerr << "ordermat: " << category << " error: " << e.what() << '\n';
   return code;
}

}  // namespace

int main(int argc, char** argv) {
   ordermat::retain_heap_memory();
   CLI::App app{"ordermat: transformer actor-critic with learned decision order"};
   app.require_subcommand(1);

   std::string train_config;
   auto* train = app.add_subcommand("train", "train every seed of an experiment");
   train->add_option("config", train_config, "experiment JSON")->required();

   std::string checkpoint;
   std::string eval_config;
   auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (or 'random')");
   eval->add_option("checkpoint", checkpoint, "checkpoint base path, .json or .bin")->required();
   eval->add_option("config", eval_config, "experiment JSON")->required();

   std::vector< std::string > dirs;
   std::string compare_out = "comparison";
   auto* cmp = app.add_subcommand("compare", "align run directories and tabulate quantiles");
   cmp->add_option("dirs", dirs, "run directories")->required();
   cmp->add_option("--out", compare_out, "output directory for comparison.csv/json");

   try {
      app.parse(argc, argv);
   } catch(const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? kOk : kUsage;
   }

   try {
      if(*train) {
         const auto config = load_with_overrides(train_config);
         const auto summary = ordermat::run(config, &std::cout);
         std::cout << summary.json.dump(2) << '\n';
         if(summary.failed_seeds > 0) {
            std::cerr << "ordermat: " << summary.failed_seeds << " seed(s) failed; see result.json per seed\n";
            return kSeedFailed;
         }
         return kOk;
      }
      if(*eval) {
         const auto config = load_with_overrides(eval_config);
         nlohmann::json out = nlohmann::json::array();
         for(auto seed : config.seeds) {
            const auto r = ordermat::evaluate_checkpoint(checkpoint, config, seed);
            out.push_back({{"seed", seed}, {"mean", r.mean}, {"median", r.median}, {"q25", r.q25}, {"q75", r.q75}, {"order_entropy", r.mean_entropy}});
         }
         std::cout << out.dump(2) << '\n';
         return kOk;
      }
      std::vector< std::filesystem::path > paths(dirs.begin(), dirs.end());
      std::cout << ordermat::compare(paths, compare_out).dump(2) << '\n';
      return kOk;
   } catch(const ordermat::ProtocolMismatch& e) {
      return report("protocol", e, kProtocol);
   } catch(const ordermat::InvalidArgument& e) {
      return report("config", e, kUsage);
   } catch(const ordermat::IoError& e) {
      return report("io", e, kIo);
   } catch(const ordermat::NumericError& e) {
      return report("numeric", e, kNumeric);
   } catch(const std::exception& e) {
      return report("internal", e, kInternal);
   }
}
