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

#include "ordermat/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ordermat/errors.hpp"
#include "ordermat/tensor_io.hpp"

namespace ordermat {

namespace fs = std::filesystem;

namespace {

std::string attention_name(EncoderAttention a) { return a == EncoderAttention::full ? "full" : "local"; }

std::string mode_name(SelectMode m) { return m == SelectMode::greedy ? "greedy" : "sample"; }

SelectMode parse_mode(const std::string& s) {
   if(s == "greedy") {
      return SelectMode::greedy;
   }
   if(s == "sample") {
      return SelectMode::sample;
   }
   throw InvalidArgument("unknown eval_mode: " + s);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
   if(path.has_parent_path()) {
      fs::create_directories(path.parent_path());
   }
   std::ofstream out(path, std::ios::trunc);
   if(! out) {
      throw IoError("cannot write " + path.string());
   }
   out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
   std::ifstream in(path);
   if(! in) {
      throw IoError("cannot read " + path.string());
   }
   try {
      return nlohmann::json::parse(in);
   } catch(const nlohmann::json::exception& e) {
      throw IoError("malformed JSON in " + path.string() + ": " + e.what());
   }
}

double mean_of(const std::vector< double >& v) {
   if(v.empty()) {
      return 0.0;
   }
   double s = 0.0;
   for(double x : v) {
      s += x;
   }
   return s / static_cast< double >(v.size());
}

nlohmann::json eval_json(const EvalResult& r) {
   return {
      {"mean", r.mean},
      {"median", r.median},
      {"q25", r.q25},
      {"q75", r.q75},
      {"order_entropy", r.mean_entropy},
      {"position_entropy", r.position_entropy},
   };
}

nlohmann::json spread_json(const std::vector< double >& v) {
   return {{"mean", mean_of(v)}, {"median", quantile(v, 0.5)}, {"q25", quantile(v, 0.25)}, {"q75", quantile(v, 0.75)}};
}

}  // namespace

// ---------------------------------------------------------------- config

int ExperimentConfig::iterations() const {
   return static_cast< int >(total_env_steps / train.batch_size());
}

NetConfig ExperimentConfig::net_config(const EnvSpec& spec) const {
   NetConfig c;
   c.n_agents = spec.n_agents;
   c.obs_dim = spec.obs_dim;
   c.action_space = spec.action_space;
   c.hidden_dim = net.hidden_dim;
   c.n_blocks = net.n_blocks;
   c.n_heads = net.n_heads;
   c.encoder_attention = net.encoder_attention;
   c.output_gain = net.output_gain;
   c.validate();
   return c;
}

void ExperimentConfig::validate() const {
   if(seeds.empty()) {
      throw InvalidArgument("experiment: seed list is empty");
   }
   if(total_env_steps < 0 || eval_interval < 1 || eval_episodes < 1 || checkpoint_interval < 0) {
      throw InvalidArgument("experiment: step counts and intervals must be non-negative (eval ones positive)");
   }
   train.validate();
   const auto env = make_env(env_name, env_params);
   const auto& spec = env->spec();
   train.order_strategy.validate(spec.n_agents, train.lead_agent);
   static_cast< void >(net_config(spec));
   std::set< std::string > labels;
   for(const auto& v : variants) {
      if(v.label.empty() || v.label.find('/') != std::string::npos || ! labels.insert(v.label).second) {
         throw InvalidArgument("experiment: variant labels must be unique plain names");
      }
      apply_variant(*this, v).validate();
   }
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
   ExperimentConfig c;
   try {
      c.name = j.value("name", c.name);
      if(j.contains("env")) {
         const auto& e = j.at("env");
         c.env_name = e.value("name", c.env_name);
         c.env_params = e.value("params", nlohmann::json::object());
      }
      if(j.contains("net")) {
         const auto& n = j.at("net");
         c.net.hidden_dim = n.value("hidden_dim", c.net.hidden_dim);
         c.net.n_blocks = n.value("n_blocks", c.net.n_blocks);
         c.net.n_heads = n.value("n_heads", c.net.n_heads);
         c.net.output_gain = n.value("output_gain", c.net.output_gain);
         const auto attn = n.value("encoder_attention", std::string("full"));
         if(attn != "full" && attn != "local") {
            throw InvalidArgument("unknown encoder_attention: " + attn);
         }
         c.net.encoder_attention = attn == "full" ? EncoderAttention::full : EncoderAttention::local;
      }
      c.train_json = j.value("train", nlohmann::json::object());
      c.train = train_config_from_json(c.train_json);
      c.total_env_steps = j.value("total_env_steps", c.total_env_steps);
      c.eval_interval = j.value("eval_interval", c.eval_interval);
      c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
      c.eval_mode = parse_mode(j.value("eval_mode", std::string("greedy")));
      c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
      if(j.contains("seeds")) {
         c.seeds = j.at("seeds").get< std::vector< std::uint64_t > >();
      }
      c.output_dir = j.value("output_dir", c.output_dir.string());
      if(j.contains("top_percents")) {
         c.top_percents = j.at("top_percents").get< std::vector< double > >();
      }
      c.parallel_seeds = j.value("parallel_seeds", c.parallel_seeds);
      for(const auto& v : j.value("variants", nlohmann::json::array())) {
         c.variants.push_back({v.at("label").get< std::string >(), v.value("train", nlohmann::json::object())});
      }
   } catch(const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("experiment config: ") + e.what());
   }
   c.validate();
   return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
   return experiment_config_from_json(read_json(path));
}

nlohmann::json to_json(const ExperimentConfig& c) {
   nlohmann::json variants = nlohmann::json::array();
   for(const auto& v : c.variants) {
      variants.push_back({{"label", v.label}, {"train", v.train_overrides}});
   }
   return {
      {"name", c.name},
      {"env", {{"name", c.env_name}, {"params", c.env_params}}},
      {"net",
       {{"hidden_dim", c.net.hidden_dim},
        {"n_blocks", c.net.n_blocks},
        {"n_heads", c.net.n_heads},
        {"encoder_attention", attention_name(c.net.encoder_attention)},
        {"output_gain", c.net.output_gain}}},
      {"train", to_json(c.train)},
      {"total_env_steps", c.total_env_steps},
      {"eval_interval", c.eval_interval},
      {"eval_episodes", c.eval_episodes},
      {"eval_mode", mode_name(c.eval_mode)},
      {"checkpoint_interval", c.checkpoint_interval},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir.string()},
      {"top_percents", c.top_percents},
      {"parallel_seeds", c.parallel_seeds},
      {"variants", variants},
   };
}

ExperimentConfig apply_variant(const ExperimentConfig& base, const Variant& variant) {
   ExperimentConfig c = base;
   nlohmann::json train = base.train_json;
   train.merge_patch(variant.train_overrides);
   c.train_json = train;
   c.train = train_config_from_json(train);
   c.name = base.name + "/" + variant.label;
   c.output_dir = base.output_dir / variant.label;
   c.variants.clear();
   return c;
}

// ---------------------------------------------------------------- metrics CSV

const std::vector< std::string >& metrics_columns() {
   static const std::vector< std::string > cols = {
      "iteration",     "env_steps",      "seed",          "train_reward",   "order_entropy",
      "encoder_loss",  "decoder_loss",   "action_entropy", "update_order_entropy",
      "clip_fraction", "grad_scale",     "eval_mean",     "eval_median",    "eval_q25",
      "eval_q75",      "eval_order_entropy",
   };
   return cols;
}

std::string metrics_header() {
   std::string out;
   for(const auto& c : metrics_columns()) {
      out += (out.empty() ? "" : ",") + c;
   }
   return out;
}

namespace {

std::string fmt_double(double v) {
   char buf[40];
   std::snprintf(buf, sizeof(buf), "%.17g", v);
   return buf;
}

std::string fmt_optional(const std::optional< double >& v) { return v ? fmt_double(*v) : std::string(); }

double parse_double(const std::string& s) {
   char* end = nullptr;
   const double v = std::strtod(s.c_str(), &end);
   if(s.empty() || end != s.c_str() + s.size()) {
      throw InvalidArgument("metrics CSV: bad number '" + s + "'");
   }
   return v;
}

std::optional< double > parse_optional(const std::string& s) {
   if(s.empty()) {
      return std::nullopt;
   }
   return parse_double(s);
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
   std::vector< std::string > f = {
      std::to_string(r.iteration),
      std::to_string(r.env_steps),
      std::to_string(r.seed),
      fmt_double(r.train_reward),
      fmt_double(r.order_entropy),
      fmt_double(r.loss.encoder_loss),
      fmt_double(r.loss.decoder_loss),
      fmt_double(r.loss.action_entropy),
      fmt_double(r.loss.order_entropy),
      fmt_double(r.loss.clip_fraction),
      fmt_double(r.loss.grad_scale),
      fmt_optional(r.eval_mean),
      fmt_optional(r.eval_median),
      fmt_optional(r.eval_q25),
      fmt_optional(r.eval_q75),
      fmt_optional(r.eval_order_entropy),
   };
   std::string out;
   for(std::size_t k = 0; k < f.size(); ++k) {
      out += (k ? "," : "") + f[k];
   }
   return out;
}

MetricsRow parse_metrics_row(const std::string& line) {
   std::vector< std::string > f;
   std::stringstream ss(line);
   std::string item;
   while(std::getline(ss, item, ',')) {
      f.push_back(item);
   }
   if(! line.empty() && line.back() == ',') {
      f.emplace_back();
   }
   if(f.size() != metrics_columns().size()) {
      throw InvalidArgument("metrics CSV: expected " + std::to_string(metrics_columns().size()) + " fields, got "
                            + std::to_string(f.size()));
   }
   MetricsRow r;
   try {
      r.iteration = std::stoi(f[0]);
      r.env_steps = std::stol(f[1]);
      r.seed = std::stoull(f[2]);
   } catch(const std::exception&) {
      throw InvalidArgument("metrics CSV: bad integer field in '" + line + "'");
   }
   r.train_reward = parse_double(f[3]);
   r.order_entropy = parse_double(f[4]);
   r.loss.encoder_loss = parse_double(f[5]);
   r.loss.decoder_loss = parse_double(f[6]);
   r.loss.action_entropy = parse_double(f[7]);
   r.loss.order_entropy = parse_double(f[8]);
   r.loss.clip_fraction = parse_double(f[9]);
   r.loss.grad_scale = parse_double(f[10]);
   r.eval_mean = parse_optional(f[11]);
   r.eval_median = parse_optional(f[12]);
   r.eval_q25 = parse_optional(f[13]);
   r.eval_q75 = parse_optional(f[14]);
   r.eval_order_entropy = parse_optional(f[15]);
   return r;
}

void write_metrics_csv(const fs::path& path, const std::vector< MetricsRow >& rows) {
   if(path.has_parent_path()) {
      fs::create_directories(path.parent_path());
   }
   std::ofstream out(path, std::ios::trunc);
   if(! out) {
      throw IoError("cannot write " + path.string());
   }
   out << metrics_header() << '\n';
   for(const auto& r : rows) {
      out << format_metrics_row(r) << '\n';
   }
}

std::vector< MetricsRow > read_metrics_csv(const fs::path& path) {
   std::ifstream in(path);
   if(! in) {
      throw IoError("cannot read " + path.string());
   }
   std::string line;
   if(! std::getline(in, line) || line != metrics_header()) {
      throw IoError("metrics CSV has an unexpected header: " + path.string());
   }
   std::vector< MetricsRow > rows;
   while(std::getline(in, line)) {
      if(! line.empty()) {
         rows.push_back(parse_metrics_row(line));
      }
   }
   return rows;
}

std::vector< double > moving_average(const std::vector< double >& values, int window) {
   if(window < 1) {
      throw InvalidArgument("moving_average: window must be >= 1");
   }
   std::vector< double > out(values.size());
   double acc = 0.0;
   for(std::size_t k = 0; k < values.size(); ++k) {
      acc += values[k];
      if(k >= static_cast< std::size_t >(window)) {
         acc -= values[k - static_cast< std::size_t >(window)];
      }
      out[k] = acc / static_cast< double >(std::min(k + 1, static_cast< std::size_t >(window)));
   }
   return out;
}

// ---------------------------------------------------------------- training

namespace {

fs::path seed_dir(const ExperimentConfig& c, std::uint64_t seed) {
   return c.output_dir / ("seed_" + std::to_string(seed));
}

std::uint64_t net_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t rollout_seed(std::uint64_t seed) { return derive_seed(seed, 2); }
std::uint64_t update_seed(std::uint64_t seed) { return derive_seed(seed, 3); }
std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, 4); }

void write_seed_result(const fs::path& dir, const SeedResult& r, int iterations) {
   nlohmann::json j = {{"seed", r.seed}, {"ok", r.ok}, {"failure", r.failure}, {"iterations", iterations}};
   if(r.final_eval) {
      j["final_eval"] = eval_json(*r.final_eval);
      j["final_eval"]["returns"] = r.final_eval->returns;
   }
   write_json(dir / "result.json", j);
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, std::ostream* log) {
   const auto env = make_env(config.env_name, config.env_params);
   const auto& spec = env->spec();
   const TrainConfig& tc = config.train;
   TransformerActorCritic net(config.net_config(spec), net_seed(seed));
   PpoTrainer trainer(net, tc);
   RolloutWorker worker(*env, tc.order_strategy, tc.lead_agent, tc.rollout_threads, rollout_seed(seed));
   Rng update_rng(update_seed(seed));

   const fs::path dir = seed_dir(config, seed);
   fs::create_directories(dir);
   std::ofstream csv(dir / "metrics.csv", std::ios::trunc);
   if(! csv) {
      throw IoError("cannot write " + (dir / "metrics.csv").string());
   }
   csv << metrics_header() << '\n';

   SeedResult result;
   result.seed = seed;
   const int iterations = config.iterations();
   const nlohmann::json ckpt_meta = {{"seed", seed}, {"experiment", config.name}};
   try {
      for(int it = 0; it < iterations; ++it) {
         MetricsRow row;
         row.iteration = it;
         row.env_steps = static_cast< long >(it + 1) * tc.batch_size();
         row.seed = seed;
         const TrajectoryBatch batch = worker.collect(net, tc.steps_per_rollout);
         row.train_reward = mean_of(batch.rewards);
         row.order_entropy = mean_of(batch.order_entropy);

         const auto reports = trainer.update(batch, update_rng);
         for(const auto& rep : reports) {
            const double w = 1.0 / static_cast< double >(reports.size());
            row.loss.encoder_loss += w * rep.encoder_loss;
            row.loss.decoder_loss += w * rep.decoder_loss;
            row.loss.action_entropy += w * rep.action_entropy;
            row.loss.order_entropy += w * rep.order_entropy;
            row.loss.clip_fraction += w * rep.clip_fraction;
         }
         row.loss.grad_scale = reports.back().grad_scale;

         if((it + 1) % config.eval_interval == 0 || it + 1 == iterations) {
            EvalResult ev = evaluate(*env, net, tc.order_strategy, tc.lead_agent, config.eval_episodes, eval_seed(seed), config.eval_mode);
            row.eval_mean = ev.mean;
            row.eval_median = ev.median;
            row.eval_q25 = ev.q25;
            row.eval_q75 = ev.q75;
            row.eval_order_entropy = ev.mean_entropy;
            if(it + 1 == iterations) {
               result.final_eval = ev;
            }
            if(log) {
               *log << config.name << " seed " << seed << " iter " << it + 1 << "/" << iterations << " eval_mean "
                    << ev.mean << " order_entropy " << row.order_entropy << '\n';
            }
         }
         if(config.checkpoint_interval > 0 && (it + 1) % config.checkpoint_interval == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "iter_%06d", it + 1);
            save_checkpoint(dir / "checkpoints" / name, net, ckpt_meta);
         }
         csv << format_metrics_row(row) << '\n' << std::flush;
         result.rows.push_back(row);
      }
   } catch(const NumericError& e) {
      result.ok = false;
      result.failure = std::string("numeric: ") + e.what();
      if(log) {
         *log << config.name << " seed " << seed << " aborted: " << e.what() << '\n';
      }
   }
   if(result.ok && ! result.final_eval) {
      result.final_eval =
         evaluate(*env, net, tc.order_strategy, tc.lead_agent, config.eval_episodes, eval_seed(seed), config.eval_mode);
   }
   save_checkpoint(dir / "final", net, ckpt_meta);
   write_seed_result(dir, result, iterations);
   return result;
}

namespace {

nlohmann::json seed_summary(const ExperimentConfig& config, std::uint64_t seed) {
   const fs::path dir = seed_dir(config, seed);
   nlohmann::json res = read_json(dir / "result.json");
   const auto rows = read_metrics_csv(dir / "metrics.csv");
   std::vector< double > evals;
   std::vector< double > entropy;
   for(const auto& r : rows) {
      if(r.eval_mean) {
         evals.push_back(*r.eval_mean);
      }
      entropy.push_back(r.order_entropy);
   }
   nlohmann::json top = nlohmann::json::object();
   std::sort(evals.begin(), evals.end(), std::greater<>());
   for(double pct : config.top_percents) {
      if(evals.empty()) {
         break;
      }
      const auto k = std::max< std::size_t >(1, static_cast< std::size_t >(std::ceil(pct / 100.0 * static_cast< double >(evals.size()))));
      top[fmt_double(pct)] = mean_of(std::vector< double >(evals.begin(), evals.begin() + static_cast< std::ptrdiff_t >(k)));
   }
   res["top_percent_eval_mean"] = top;
   if(! entropy.empty()) {
      const auto smooth = moving_average(entropy, 50);
      res["order_entropy_initial"] = entropy.front();
      res["order_entropy_final_smoothed"] = smooth.back();
   }
   return res;
}

nlohmann::json build_summary(const ExperimentConfig& config, int& failed) {
   nlohmann::json seeds = nlohmann::json::array();
   std::vector< double > finals;
   failed = 0;
   for(auto seed : config.seeds) {
      nlohmann::json s = seed_summary(config, seed);
      if(! s.value("ok", false)) {
         ++failed;
      } else if(s.contains("final_eval")) {
         finals.push_back(s["final_eval"]["mean"].get< double >());
      }
      seeds.push_back(s);
   }
   return {
      {"name", config.name},
      {"env", config.env_name},
      {"order_strategy", config.train.order_strategy.name()},
      {"lead_agent", config.train.lead_agent},
      {"loss_mode", config.train.loss_mode == LossMode::product ? "product" : "weighted_sum"},
      {"iterations", config.iterations()},
      {"batch_size", config.train.batch_size()},
      {"seeds", seeds},
      {"final_eval_mean_across_seeds", spread_json(finals)},
      {"failed_seeds", failed},
   };
}

}  // namespace

RunSummary run(const ExperimentConfig& config, std::ostream* log) {
   config.validate();
   RunSummary out;
   if(! config.variants.empty()) {
      std::vector< fs::path > dirs;
      nlohmann::json per_variant = nlohmann::json::object();
      for(const auto& v : config.variants) {
         const ExperimentConfig vc = apply_variant(config, v);
         RunSummary s = run(vc, log);
         out.failed_seeds += s.failed_seeds;
         per_variant[v.label] = s.json;
         dirs.push_back(vc.output_dir);
      }
      write_json(config.output_dir / "config.json", to_json(config));
      out.json = {{"name", config.name}, {"variants", per_variant}, {"comparison", compare(dirs, config.output_dir)}};
      write_json(config.output_dir / "summary.json", out.json);
      return out;
   }

   fs::create_directories(config.output_dir);
   write_json(config.output_dir / "config.json", to_json(config));
   if(config.parallel_seeds && config.seeds.size() > 1) {
      std::vector< pid_t > children;
      for(auto seed : config.seeds) {
         const pid_t pid = fork();
         if(pid < 0) {
            throw IoError("fork failed");
         }
         if(pid == 0) {
            int code = 0;
            try {
               code = run_seed(config, seed, log).ok ? 0 : 3;
            } catch(...) {
               code = 4;
            }
            std::_Exit(code);
         }
         children.push_back(pid);
      }
      for(pid_t pid : children) {
         int status = 0;
         waitpid(pid, &status, 0);
      }
   } else {
      for(auto seed : config.seeds) {
         run_seed(config, seed, log);
      }
   }
   out.json = build_summary(config, out.failed_seeds);
   write_json(config.output_dir / "summary.json", out.json);
   return out;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint, const ExperimentConfig& config, std::uint64_t seed) {
   const auto env = make_env(config.env_name, config.env_params);
   const auto& spec = env->spec();
   TransformerActorCritic net = checkpoint == "random" ? TransformerActorCritic(config.net_config(spec), net_seed(seed))
                                                       : load_checkpoint(checkpoint_base(checkpoint));
   const auto& nc = net.config();
   if(nc.n_agents != spec.n_agents || nc.obs_dim != spec.obs_dim || ! (nc.action_space == spec.action_space)) {
      throw InvalidArgument("checkpoint does not match the configured environment");
   }
   return evaluate(*env, net, config.train.order_strategy, config.train.lead_agent, config.eval_episodes, eval_seed(seed), config.eval_mode);
}

// ---------------------------------------------------------------- compare

namespace {

nlohmann::json protocol_of(const nlohmann::json& cfg) {
   const auto& train = cfg.at("train");
   return {
      {"env", cfg.at("env")},
      {"eval_episodes", cfg.at("eval_episodes")},
      {"eval_interval", cfg.at("eval_interval")},
      {"eval_mode", cfg.at("eval_mode")},
      {"total_env_steps", cfg.at("total_env_steps")},
      {"batch_size", train.at("rollout_threads").get< int >() * train.at("steps_per_rollout").get< int >()},
   };
}

}  // namespace

nlohmann::json compare(const std::vector< fs::path >& run_dirs, const fs::path& out_dir) {
   if(run_dirs.empty()) {
      throw InvalidArgument("compare: no run directories given");
   }
   struct Run {
      std::string label;
      std::map< long, std::vector< double > > evals;  // env_steps -> eval_mean per seed
      int seeds = 0;
   };
   std::vector< Run > runs;
   nlohmann::json reference;
   std::map< std::string, int > label_count;
   for(const auto& dir : run_dirs) {
      const nlohmann::json cfg = read_json(dir / "config.json");
      if(cfg.contains("variants") && ! cfg.at("variants").empty()) {
         throw ProtocolMismatch("compare: " + dir.string() + " is a variant matrix; pass its variant directories");
      }
      const nlohmann::json proto = protocol_of(cfg);
      if(reference.is_null()) {
         reference = proto;
      } else {
         for(const auto& [key, value] : reference.items()) {
            if(proto.at(key) != value) {
               throw ProtocolMismatch(
                  "compare: " + dir.string() + " differs from " + run_dirs.front().string() + " in " + key + " ("
                  + proto.at(key).dump() + " vs " + value.dump() + ")"
               );
            }
         }
      }
      Run run;
      const std::string base = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
      const int seen = ++label_count[base];
      run.label = seen == 1 ? base : base + "#" + std::to_string(seen);
      for(const auto& seed : cfg.at("seeds")) {
         const fs::path csv = dir / ("seed_" + std::to_string(seed.get< std::uint64_t >())) / "metrics.csv";
         for(const auto& row : read_metrics_csv(csv)) {
            if(row.eval_mean) {
               run.evals[row.env_steps].push_back(*row.eval_mean);
            }
         }
         ++run.seeds;
      }
      runs.push_back(std::move(run));
   }

   std::set< long > steps;
   for(const auto& [s, _] : runs.front().evals) {
      steps.insert(s);
   }
   for(const auto& r : runs) {
      std::set< long > mine;
      for(const auto& [s, _] : r.evals) {
         mine.insert(s);
      }
      std::set< long > both;
      std::set_intersection(steps.begin(), steps.end(), mine.begin(), mine.end(), std::inserter(both, both.begin()));
      steps = both;
   }

   fs::create_directories(out_dir);
   std::ofstream csv(out_dir / "comparison.csv", std::ios::trunc);
   if(! csv) {
      throw IoError("cannot write " + (out_dir / "comparison.csv").string());
   }
   csv << "env_steps,label,n_seeds,mean,median,q25,q75,diff_median\n";
   nlohmann::json curves = nlohmann::json::object();
   nlohmann::json finals = nlohmann::json::object();
   for(const auto& r : runs) {
      nlohmann::json c = {{"mean", nlohmann::json::array()}, {"median", nlohmann::json::array()}, {"q25", nlohmann::json::array()}, {"q75", nlohmann::json::array()}, {"diff_median", nlohmann::json::array()}};
      for(long s : steps) {
         const auto& v = r.evals.at(s);
         const double med = quantile(v, 0.5);
         const double ref = quantile(runs.front().evals.at(s), 0.5);
         csv << s << ',' << r.label << ',' << v.size() << ',' << fmt_double(mean_of(v)) << ',' << fmt_double(med) << ','
             << fmt_double(quantile(v, 0.25)) << ',' << fmt_double(quantile(v, 0.75)) << ',' << fmt_double(med - ref) << '\n';
         c["mean"].push_back(mean_of(v));
         c["median"].push_back(med);
         c["q25"].push_back(quantile(v, 0.25));
         c["q75"].push_back(quantile(v, 0.75));
         c["diff_median"].push_back(med - ref);
      }
      curves[r.label] = c;
      if(! steps.empty()) {
         finals[r.label] = spread_json(r.evals.at(*steps.rbegin()));
      }
   }
   nlohmann::json out = {
      {"protocol", reference},
      {"reference", runs.front().label},
      {"env_steps", std::vector< long >(steps.begin(), steps.end())},
      {"curves", curves},
      {"final", finals},
   };
   write_json(out_dir / "comparison.json", out);
   return out;
}

}  // namespace ordermat
