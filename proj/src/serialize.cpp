#include "fsnet/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace fsnet {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::runtime_error("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["data"] = {{"kind", c.data.kind}};
  if (c.data.kind == "ar1") {
    j["data"]["phi"] = c.data.phi;
    j["data"]["length"] = c.data.length;
  }
  if (c.data.kind == "csv") {
    j["data"]["path"] = c.data.path;
    j["data"]["feature_columns"] = c.data.feature_columns;
  }
  j["learner"] = c.learner;
  j["horizon"] = c.horizon;
  j["lookback"] = c.lookback;
  j["warmup_ratio"] = c.warmup_ratio;
  j["num_blocks"] = c.num_blocks;
  j["filters"] = c.filters;
  j["kernel_size"] = c.kernel_size;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["fsnet"] = {{"gamma", c.fsnet.gamma},         {"gamma_prime", c.fsnet.gamma_prime},
                {"tau", c.fsnet.tau},             {"top_k", c.fsnet.top_k},
                {"mem_items", c.fsnet.mem_items}, {"adapter_hidden", c.fsnet.adapter_hidden},
                {"grad_clip", c.fsnet.grad_clip},
                {"adapter_weight_decay", c.fsnet.adapter_weight_decay}};
  j["er"] = {{"buffer_capacity", c.er.buffer_capacity},
             {"replay_batch", c.er.replay_batch},
             {"lambda", c.er.lambda}};
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  j["verbose"] = c.verbose;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown_keys(j, {"data", "learner", "horizon", "lookback", "warmup_ratio", "num_blocks",
                          "filters", "kernel_size", "lr", "weight_decay", "fsnet", "er", "seeds",
                          "out_dir", "verbose", "threads"},
                      "top level");
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(d, {"kind", "phi", "length", "path", "feature_columns"}, "data");
    c.data.kind = d.value("kind", c.data.kind);
    c.data.phi = d.value("phi", c.data.phi);
    c.data.length = d.value("length", c.data.length);
    c.data.path = d.value("path", c.data.path);
    if (d.contains("feature_columns")) {
      c.data.feature_columns = d.at("feature_columns").get<std::vector<std::string>>();
    }
  }
  c.learner = j.value("learner", c.learner);
  c.horizon = j.value("horizon", c.horizon);
  c.lookback = j.value("lookback", c.lookback);
  c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
  c.num_blocks = j.value("num_blocks", c.num_blocks);
  c.filters = j.value("filters", c.filters);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("fsnet")) {
    const json& f = j.at("fsnet");
    reject_unknown_keys(
        f,
        {"gamma", "gamma_prime", "tau", "top_k", "mem_items", "adapter_hidden", "grad_clip",
         "adapter_weight_decay"},
        "fsnet");
    c.fsnet.gamma = f.value("gamma", c.fsnet.gamma);
    c.fsnet.gamma_prime = f.value("gamma_prime", c.fsnet.gamma_prime);
    c.fsnet.tau = f.value("tau", c.fsnet.tau);
    c.fsnet.top_k = f.value("top_k", c.fsnet.top_k);
    c.fsnet.mem_items = f.value("mem_items", c.fsnet.mem_items);
    c.fsnet.adapter_hidden = f.value("adapter_hidden", c.fsnet.adapter_hidden);
    c.fsnet.grad_clip = f.value("grad_clip", c.fsnet.grad_clip);
    c.fsnet.adapter_weight_decay = f.value("adapter_weight_decay", c.fsnet.adapter_weight_decay);
  }
  if (j.contains("er")) {
    const json& e = j.at("er");
    reject_unknown_keys(e, {"buffer_capacity", "replay_batch", "lambda"}, "er");
    c.er.buffer_capacity = e.value("buffer_capacity", c.er.buffer_capacity);
    c.er.replay_batch = e.value("replay_batch", c.er.replay_batch);
    c.er.lambda = e.value("lambda", c.er.lambda);
  }
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.out_dir = j.value("out_dir", c.out_dir);
  c.verbose = j.value("verbose", c.verbose);
  c.threads = j.value("threads", c.threads);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

json result_to_json(const ExperimentResult& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["config"] = config_to_json(r.config);
  json seeds = json::array();
  for (const SeedResult& s : r.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"cum_mse", s.cum_mse},
                     {"cum_mae", s.cum_mae},
                     {"warmup_steps", s.warmup_steps},
                     {"online_steps", s.online_steps},
                     {"warmup_triggers", s.warmup_triggers},
                     {"online_triggers", s.online_triggers},
                     {"trigger_counts", s.trigger_counts},
                     {"wall_time_s", s.wall_time_s},
                     {"diverged", s.diverged}});
  }
  j["per_seed"] = seeds;
  j["mean_mse"] = r.mean_mse;
  j["std_mse"] = r.std_mse;
  j["mean_mae"] = r.mean_mae;
  j["std_mae"] = r.std_mae;
  j["param_counts"] = {{"backbone", r.param_counts.backbone},
                       {"adapter", r.param_counts.adapter},
                       {"g_ema", r.param_counts.g_ema},
                       {"assoc_memory", r.param_counts.assoc_memory},
                       {"episodic_buffer", r.param_counts.episodic_buffer},
                       {"total", r.param_counts.total()}};
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

void apply_manifest(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  json j;
  in >> j;
  reject_unknown_keys(
      j, {"csv", "feature_columns", "lookback", "horizon", "warmup_ratio", "seed", "seeds"},
      "manifest");
  config.data.kind = "csv";
  config.data.path = j.at("csv").get<std::string>();
  if (j.contains("feature_columns")) {
    config.data.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
  }
  if (j.contains("lookback")) config.lookback = j.at("lookback").get<int>();
  if (j.contains("horizon")) config.horizon = j.at("horizon").get<int>();
  if (j.contains("warmup_ratio")) config.warmup_ratio = j.at("warmup_ratio").get<double>();
  if (j.contains("seed")) config.seeds = {j.at("seed").get<uint64_t>()};
  if (j.contains("seeds")) config.seeds = j.at("seeds").get<std::vector<uint64_t>>();
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json j;
  j["format"] = "fsnet-checkpoint";
  j["version"] = ck.version;
  j["kind"] = ck.kind;
  j["config"] = {{"num_blocks", ck.config.num_blocks}, {"filters", ck.config.filters},
                 {"kernel_size", ck.config.kernel_size}, {"input_dim", ck.config.input_dim},
                 {"lookback", ck.config.lookback},       {"horizon", ck.config.horizon}};
  json tensors = json::object();
  for (const auto& [name, t] : ck.tensors) {
    tensors[name] = {{"shape", t.shape()}, {"data", t.vec()}};
  }
  j["tensors"] = tensors;
  atomic_write(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "fsnet-checkpoint") {
    throw std::runtime_error("checkpoint: " + path + " is not a model checkpoint");
  }
  Checkpoint ck;
  ck.version = j.at("version").get<int>();
  if (ck.version != 1) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ck.version));
  }
  ck.kind = j.at("kind").get<std::string>();
  const json& c = j.at("config");
  ck.config.num_blocks = c.at("num_blocks").get<int>();
  ck.config.filters = c.at("filters").get<int>();
  ck.config.kernel_size = c.at("kernel_size").get<int>();
  ck.config.input_dim = c.at("input_dim").get<int>();
  ck.config.lookback = c.at("lookback").get<int>();
  ck.config.horizon = c.at("horizon").get<int>();
  for (auto it = j.at("tensors").begin(); it != j.at("tensors").end(); ++it) {
    ck.tensors.emplace_back(
        it.key(), Tensor(it.value().at("shape").get<std::vector<int64_t>>(),
                         it.value().at("data").get<std::vector<double>>()));
  }
  return ck;
}

void atomic_write(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp);
    out << contents;
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fsnet
