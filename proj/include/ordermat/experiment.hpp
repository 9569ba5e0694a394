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

#ifndef ORDERMAT_EXPERIMENT_HPP
#define ORDERMAT_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordermat/envs.hpp"
#include "ordermat/nets.hpp"
#include "ordermat/ppo.hpp"
#include "ordermat/rollout.hpp"

namespace ordermat {

/// Run directories from different protocols cannot be compared.
class ProtocolMismatch : public InvalidArgument {
  public:
   using InvalidArgument::InvalidArgument;
};

/// Network settings that are not implied by the environment.
struct NetSettings {
   int hidden_dim = 64;
   int n_blocks = 1;
   int n_heads = 1;
   EncoderAttention encoder_attention = EncoderAttention::full;
   double output_gain = 0.01;
};

/// One entry of a baseline matrix: a label and overrides for "train".
struct Variant {
   std::string label;
   nlohmann::json train_overrides;
};

struct ExperimentConfig {
   std::string name = "experiment";
   std::string env_name = "informed_leader";
   nlohmann::json env_params = nlohmann::json::object();
   NetSettings net;
   TrainConfig train;
   nlohmann::json train_json = nlohmann::json::object();  // as written, before profile expansion
   long total_env_steps = 0;
   int eval_interval = 10;  // iterations
   int eval_episodes = 32;
   SelectMode eval_mode = SelectMode::greedy;
   int checkpoint_interval = 0;  // iterations; 0 keeps only the final checkpoint
   std::vector< std::uint64_t > seeds = {1};
   std::filesystem::path output_dir = "runs/experiment";
   std::vector< double > top_percents = {10.0, 25.0, 50.0};
   bool parallel_seeds = false;
   std::vector< Variant > variants;

   /// Iterations implied by total_env_steps and the batch size.
   [[nodiscard]] int iterations() const;
   [[nodiscard]] NetConfig net_config(const EnvSpec& spec) const;
   void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// The same experiment with one variant's train overrides applied.
ExperimentConfig apply_variant(const ExperimentConfig& base, const Variant& variant);

/**
 * One CSV row per training iteration. Eval columns are filled on
 * evaluation iterations and empty otherwise.
 */
struct MetricsRow {
   int iteration = 0;
   long env_steps = 0;
   std::uint64_t seed = 0;
   double train_reward = 0.0;   // mean per-step reward of the batch
   double order_entropy = 0.0;  // mean masked next-agent entropy of the rollout
   LossReport loss;
   std::optional< double > eval_mean;
   std::optional< double > eval_median;
   std::optional< double > eval_q25;
   std::optional< double > eval_q75;
   std::optional< double > eval_order_entropy;

   bool operator==(const MetricsRow&) const = default;
};

[[nodiscard]] const std::vector< std::string >& metrics_columns();
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);
void write_metrics_csv(const std::filesystem::path& path, const std::vector< MetricsRow >& rows);
std::vector< MetricsRow > read_metrics_csv(const std::filesystem::path& path);

/// Trailing moving average with the given window (shorter at the start).
std::vector< double > moving_average(const std::vector< double >& values, int window);

struct SeedResult {
   std::uint64_t seed = 0;
   bool ok = true;
   std::string failure;
   std::vector< MetricsRow > rows;
   std::optional< EvalResult > final_eval;
};

/// Trains one seed and writes its artifacts under output_dir/seed_<seed>.
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, std::ostream* log = nullptr);

struct RunSummary {
   nlohmann::json json;
   int failed_seeds = 0;
};

/// All seeds (or, when variants are present, every variant into its own
/// subdirectory followed by a comparison). Writes config.json, per-seed
/// metrics and checkpoints, and summary.json.
RunSummary run(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Greedy (or configured) evaluation of a checkpoint; "random" builds a fresh
/// network from the config instead.
EvalResult evaluate_checkpoint(const std::string& checkpoint, const ExperimentConfig& config, std::uint64_t seed);

/// Aligns runs by env steps and reports, per run, the median and 25/75
/// quantiles of the eval mean across seeds. Writes comparison.csv and
/// comparison.json under out_dir. Throws ProtocolMismatch when the runs do
/// not share env, batch and eval protocol.
nlohmann::json compare(const std::vector< std::filesystem::path >& run_dirs, const std::filesystem::path& out_dir);

}  // namespace ordermat

#endif  // ORDERMAT_EXPERIMENT_HPP
