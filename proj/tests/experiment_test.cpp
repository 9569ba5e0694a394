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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ordermat/errors.hpp"
#include "ordermat/experiment.hpp"

namespace ordermat {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
   const auto dir = fs::temp_directory_path() / ("ordermat_experiment_test_" + name);
   fs::remove_all(dir);
   return dir;
}

nlohmann::json tiny_config(const fs::path& out) {
   return {
      {"name", "tiny"},
      {"env", {{"name", "informed_leader"}, {"params", {{"n_agents", 3}, {"informed_agent", 2}, {"episode_length", 4}}}}},
      {"net", {{"hidden_dim", 8}, {"n_blocks", 1}, {"n_heads", 1}, {"encoder_attention", "local"}}},
      {"train", {{"profile", "smac-like"}, {"rollout_threads", 4}, {"steps_per_rollout", 2}, {"ppo_epochs", 2}, {"order_strategy", "learned"}}},
      {"total_env_steps", 24},
      {"eval_interval", 2},
      {"eval_episodes", 4},
      {"seeds", {1, 2}},
      {"output_dir", out.string()},
   };
}

std::string slurp(const fs::path& p) {
   std::ifstream in(p);
   std::stringstream ss;
   ss << in.rdbuf();
   return ss.str();
}

TEST(MetricsCsv, RoundTripKeepsEveryBit) {
   MetricsRow a;
   a.iteration = 3;
   a.env_steps = 2048;
   a.seed = 7;
   a.train_reward = 0.1 + 0.2;
   a.order_entropy = 1.0 / 3.0;
   a.loss.encoder_loss = 1e-300;
   a.loss.decoder_loss = -0.0125;
   a.loss.grad_scale = 0.75;
   MetricsRow b = a;
   b.iteration = 4;
   b.eval_mean = 9.875;
   b.eval_median = 10.0;
   b.eval_q25 = std::numeric_limits< double >::denorm_min();
   b.eval_q75 = 11.0;
   b.eval_order_entropy = 0.6931471805599453;
   EXPECT_EQ(parse_metrics_row(format_metrics_row(a)), a);
   EXPECT_EQ(parse_metrics_row(format_metrics_row(b)), b);
   const auto dir = scratch("csv");
   fs::create_directories(dir);
   write_metrics_csv(dir / "m.csv", {a, b});
   EXPECT_EQ(read_metrics_csv(dir / "m.csv"), (std::vector< MetricsRow >{a, b}));
   EXPECT_EQ(metrics_header().substr(0, 20), "iteration,env_steps,");
   EXPECT_THROW(parse_metrics_row("1,2,3"), InvalidArgument);
   EXPECT_THROW(read_metrics_csv(dir / "missing.csv"), IoError);
   fs::remove_all(dir);
}

TEST(MovingAverage, TrailingWindow) {
   EXPECT_EQ(moving_average({1, 2, 3, 4, 5}, 2), (std::vector< double >{1, 1.5, 2.5, 3.5, 4.5}));
   EXPECT_EQ(moving_average({2, 4}, 10), (std::vector< double >{2, 3}));
   EXPECT_THROW(moving_average({1.0}, 0), InvalidArgument);
}

TEST(ExperimentConfig, ParsesAndValidates) {
   auto c = experiment_config_from_json(tiny_config("out"));
   EXPECT_EQ(c.iterations(), 3);
   EXPECT_EQ(c.net.encoder_attention, EncoderAttention::local);
   EXPECT_EQ(c.train.batch_size(), 8);
   EXPECT_EQ(c.seeds, (std::vector< std::uint64_t >{1, 2}));
   auto j = tiny_config("out");
   j["seeds"] = nlohmann::json::array();
   EXPECT_THROW(experiment_config_from_json(j).validate(), InvalidArgument);
   j = tiny_config("out");
   j["eval_mode"] = "beam";
   EXPECT_THROW(experiment_config_from_json(j), InvalidArgument);
   j = tiny_config("out");
   j["net"]["encoder_attention"] = "sparse";
   EXPECT_THROW(experiment_config_from_json(j), InvalidArgument);
   j = tiny_config("out");
   j["train"]["lead_agent"] = 5;
   EXPECT_THROW(experiment_config_from_json(j).validate(), InvalidArgument);
}

TEST(ExperimentConfig, VariantsOverrideTrainOnly) {
   auto j = tiny_config("base");
   j["variants"] = {{{"label", "sorted"}, {"train", {{"order_strategy", "sorted"}}}}};
   auto c = experiment_config_from_json(j);
   auto v = apply_variant(c, c.variants[0]);
   EXPECT_EQ(v.train.order_strategy.name(), "sorted");
   EXPECT_EQ(v.train.rollout_threads, 4);
   EXPECT_EQ(v.output_dir, fs::path("base") / "sorted");
   EXPECT_TRUE(v.variants.empty());
}

TEST(Run, WritesArtifactsAndIsDeterministic) {
   const auto a = scratch("run_a");
   const auto b = scratch("run_b");
   auto ca = experiment_config_from_json(tiny_config(a));
   auto cb = experiment_config_from_json(tiny_config(b));
   auto sa = run(ca);
   run(cb);
   EXPECT_EQ(sa.failed_seeds, 0);
   for(int seed : {1, 2}) {
      const auto d = a / ("seed_" + std::to_string(seed));
      ASSERT_TRUE(fs::exists(d / "metrics.csv"));
      EXPECT_TRUE(fs::exists(d / "result.json"));
      EXPECT_TRUE(fs::exists(d / "final.json"));
      auto rows = read_metrics_csv(d / "metrics.csv");
      ASSERT_EQ(rows.size(), 3U);
      EXPECT_FALSE(rows[0].eval_mean.has_value());
      EXPECT_TRUE(rows[1].eval_mean.has_value());
      EXPECT_TRUE(rows[2].eval_mean.has_value());
      EXPECT_EQ(rows[2].env_steps, 24);
      EXPECT_EQ(slurp(d / "metrics.csv"), slurp(b / ("seed_" + std::to_string(seed)) / "metrics.csv"));
   }
   EXPECT_NE(slurp(a / "seed_1" / "metrics.csv"), slurp(a / "seed_2" / "metrics.csv"));
   EXPECT_TRUE(fs::exists(a / "summary.json"));
   EXPECT_TRUE(fs::exists(a / "config.json"));
   EXPECT_EQ(sa.json.at("seeds").size(), 2U);

   // the final checkpoint reproduces the final evaluation
   const auto rows = read_metrics_csv(a / "seed_1" / "metrics.csv");
   auto ev = evaluate_checkpoint((a / "seed_1" / "final").string(), ca, 1);
   EXPECT_EQ(ev.mean, *rows.back().eval_mean);
   fs::remove_all(a);
   fs::remove_all(b);
}

TEST(Run, ZeroStepsStillEvaluates) {
   const auto d = scratch("zero");
   auto j = tiny_config(d);
   j["total_env_steps"] = 0;
   j["seeds"] = {3};
   auto c = experiment_config_from_json(j);
   auto res = run_seed(c, 3);
   EXPECT_TRUE(res.ok);
   EXPECT_TRUE(res.rows.empty());
   ASSERT_TRUE(res.final_eval.has_value());
   EXPECT_EQ(res.final_eval->returns.size(), 4U);
   auto random_eval = evaluate_checkpoint("random", c, 3);
   EXPECT_EQ(random_eval.returns, res.final_eval->returns);
   fs::remove_all(d);
}

TEST(Compare, IdenticalRunsHaveZeroDifference) {
   const auto root = scratch("cmp");
   auto c = experiment_config_from_json(tiny_config(root / "run"));
   run(c);
   auto out = compare({root / "run", root / "run"}, root / "cmp");
   EXPECT_EQ(out.at("reference"), "run");
   ASSERT_TRUE(out.at("curves").contains("run#2"));
   EXPECT_EQ(out.at("env_steps").size(), 2U);
   for(const auto& d : out.at("curves").at("run#2").at("diff_median")) {
      EXPECT_EQ(d.get< double >(), 0.0);
   }
   EXPECT_TRUE(fs::exists(root / "cmp" / "comparison.csv"));
   EXPECT_TRUE(fs::exists(root / "cmp" / "comparison.json"));

   auto j = tiny_config(root / "other");
   j["eval_episodes"] = 5;
   j["total_env_steps"] = 8;
   run(experiment_config_from_json(j));
   EXPECT_THROW(compare({root / "run", root / "other"}, root / "cmp2"), ProtocolMismatch);
   EXPECT_THROW(compare({}, root / "cmp3"), InvalidArgument);
   EXPECT_THROW(compare({root / "nothing"}, root / "cmp4"), IoError);
   fs::remove_all(root);
}

TEST(Compare, VariantMatrixRunsEveryLabel) {
   const auto root = scratch("variants");
   auto j = tiny_config(root);
   j["total_env_steps"] = 16;
   j["seeds"] = {1};
   j["variants"] = {
      {{"label", "learned"}, {"train", nlohmann::json::object()}},
      {{"label", "sorted"}, {"train", {{"order_strategy", "sorted"}}}},
   };
   auto s = run(experiment_config_from_json(j));
   EXPECT_EQ(s.failed_seeds, 0);
   EXPECT_TRUE(s.json.at("variants").contains("sorted"));
   EXPECT_EQ(s.json.at("comparison").at("reference"), "learned");
   EXPECT_TRUE(fs::exists(root / "sorted" / "seed_1" / "metrics.csv"));
   EXPECT_TRUE(fs::exists(root / "comparison.csv"));
   fs::remove_all(root);
}

TEST(Evaluate, FreshNetworkSamplesAtChanceLevel) {
   // uniform play: E[matches / n] = 1/2 plus P(all four match) = 1/16, per step
   auto j = tiny_config("unused");
   j["env"]["params"] = {{"n_agents", 4}, {"informed_agent", 3}, {"episode_length", 8}};
   j["net"]["output_gain"] = 0.01;
   j["eval_mode"] = "sample";
   j["eval_episodes"] = 2000;
   auto c = experiment_config_from_json(j);
   auto ev = evaluate_checkpoint("random", c, 1);
   EXPECT_NEAR(ev.mean, 8 * 0.5625, 0.1);
}

TEST(ShippedConfigs, AllParseAndValidate) {
   int count = 0;
   for(const auto& entry : fs::directory_iterator(fs::path(ORDERMAT_SOURCE_DIR) / "configs")) {
      if(entry.path().extension() != ".json") {
         continue;
      }
      SCOPED_TRACE(entry.path().string());
      auto c = load_experiment_config(entry.path());
      EXPECT_NO_THROW(c.validate());
      EXPECT_GT(c.iterations(), 0);
      for(const auto& v : c.variants) {
         EXPECT_NO_THROW(apply_variant(c, v).validate());
      }
      ++count;
   }
   EXPECT_GE(count, 6);
}

}  // namespace
}  // namespace ordermat
