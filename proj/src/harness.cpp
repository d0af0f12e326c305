#include "fsnet/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <thread>

#include "fsnet/serialize.hpp"

namespace fsnet {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit_trigger_records(std::ostream& out, int64_t step, const StepReport& rep) {
  for (size_t l = 0; l < rep.layers.size(); ++l) {
    const LayerStepInfo& info = rep.layers[l];
    out << "{\"step\":" << step << ",\"layer\":" << l << ",\"cosine\":" << fmt_double(info.cosine)
        << ",\"triggered\":" << (info.triggered ? "true" : "false") << ",\"read_rows\":[";
    for (size_t i = 0; i < info.attention.rows.size(); ++i) {
      if (i) out << ',';
      out << info.attention.rows[i];
    }
    out << "],\"attention_weights\":[";
    for (size_t i = 0; i < info.attention.weights.size(); ++i) {
      if (i) out << ',';
      out << fmt_double(info.attention.weights[i]);
    }
    out << "]}\n";
  }
}

int64_t count_reads(const StepReport& rep) {
  int64_t n = 0;
  for (const LayerStepInfo& info : rep.layers) n += info.read_performed ? 1 : 0;
  return n;
}

}  // namespace

void RunMetrics::add(double mse, double mae) {
  ++steps;
  cum_mse += (mse - cum_mse) / static_cast<double>(steps);
  cum_mae += (mae - cum_mae) / static_cast<double>(steps);
  records.push_back({steps, mse, mae, cum_mse, cum_mae});
}

int64_t RunMetrics::total_triggers() const {
  int64_t n = 0;
  for (int64_t c : trigger_counts) n += c;
  return n;
}

WarmupStats warmup_train(Learner& learner, WindowIterator& samples, RunSinks sinks) {
  WarmupStats stats;
  while (samples.has_next()) {
    const StreamSample s = samples.next();
    StepReport rep = learner.step(s);
    ++stats.steps;
    stats.trigger_events += count_reads(rep);
    if (sinks.triggers) {
      emit_trigger_records(*sinks.triggers, sinks.trigger_step_offset + stats.steps, rep);
    }
  }
  return stats;
}

RunMetrics online_run(Learner& learner, WindowIterator& samples, RunSinks sinks) {
  RunMetrics metrics;
  metrics.trigger_counts.assign(static_cast<size_t>(learner.layer_count()), 0);
  while (samples.has_next()) {
    const StreamSample s = samples.next();
    StepReport rep;
    try {
      rep = learner.step(s);
    } catch (const DivergenceError& e) {
      metrics.diverged = true;
      metrics.divergence_message = e.what();
      break;
    } catch (const NonFiniteError& e) {
      metrics.diverged = true;
      metrics.divergence_message = e.what();
      break;
    }
    // The forecast in the report predates the parameter update, so scoring
    // after the step call still evaluates before training.
    const double mse = mse_metric(rep.forecast, s.target);
    const double mae = mae_metric(rep.forecast, s.target);
    metrics.add(mse, mae);
    metrics.step_losses.push_back(rep.loss);
    for (size_t l = 0; l < rep.layers.size(); ++l) {
      if (rep.layers[l].read_performed) ++metrics.trigger_counts[l];
    }
    if (sinks.metrics) {
      *sinks.metrics << "{\"step\":" << metrics.steps << ",\"mse\":" << fmt_double(mse)
                     << ",\"mae\":" << fmt_double(mae)
                     << ",\"cum_mse\":" << fmt_double(metrics.cum_mse)
                     << ",\"cum_mae\":" << fmt_double(metrics.cum_mae) << "}\n";
    }
    if (sinks.curve) {
      *sinks.curve << metrics.steps << ',' << fmt_double(metrics.cum_mse) << '\n';
    }
    if (sinks.triggers) {
      emit_trigger_records(*sinks.triggers, sinks.trigger_step_offset + metrics.steps, rep);
    }
  }
  return metrics;
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  static const std::vector<std::string> learners = {"fsnet",       "fsnet-nomem", "fsnet-naive",
                                                    "fsnet-large", "onlinetcn",   "er"};
  if (std::find(learners.begin(), learners.end(), c.learner) == learners.end()) {
    errors.push_back("unknown learner \"" + c.learner + "\"");
  }
  if (c.horizon < 1) errors.push_back("horizon must be >= 1");
  if (c.lookback < 1) errors.push_back("lookback must be >= 1");
  if (c.warmup_ratio < 0.0 || c.warmup_ratio >= 1.0) {
    errors.push_back("warmup_ratio must be in [0, 1)");
  }
  if (c.num_blocks < 1) errors.push_back("num_blocks must be >= 1");
  if (c.filters < 1) errors.push_back("filters must be >= 1");
  if (c.kernel_size < 1) errors.push_back("kernel_size must be >= 1");
  if (c.lr <= 0.0) errors.push_back("lr must be > 0");
  if (c.weight_decay < 0.0) errors.push_back("weight_decay must be >= 0");
  if (c.seeds.empty()) errors.push_back("at least one seed is required");
  if (c.threads < 1) errors.push_back("threads must be >= 1");

  int64_t known_length = -1;
  if (c.data.kind == "s-abrupt") {
    known_length = 6000;
  } else if (c.data.kind == "s-gradual") {
    known_length = 5000;
  } else if (c.data.kind == "ar1") {
    known_length = c.data.length;
    if (std::abs(c.data.phi) >= 1.0) errors.push_back("ar1: coefficient must satisfy |phi| < 1");
    if (c.data.length < 1) errors.push_back("ar1: length must be >= 1");
  } else if (c.data.kind == "csv") {
    if (c.data.path.empty()) errors.push_back("csv: path is required");
  } else {
    errors.push_back("unknown data kind \"" + c.data.kind + "\"");
  }
  if (known_length > 0) {
    const int64_t warm = static_cast<int64_t>(std::floor(known_length * c.warmup_ratio));
    const int64_t need = static_cast<int64_t>(c.lookback) + c.horizon;
    if (c.warmup_ratio > 0.0 && warm < need) {
      errors.push_back("warm-up portion too short for one sample (needs lookback+horizon=" +
                       std::to_string(need) + ", has " + std::to_string(warm) + ")");
    }
    if (known_length - warm < need) {
      errors.push_back("online portion too short for one sample");
    }
  }

  if (c.learner.rfind("fsnet", 0) == 0) {
    try {
      FsnetHyperparams hp = c.fsnet;
      if (c.learner == "fsnet-large") hp.mem_items = 128;
      hp.validate();
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  if (c.learner == "er") {
    if (c.er.buffer_capacity < 1) errors.push_back("er: buffer_capacity must be >= 1");
    if (c.er.replay_batch < 0) errors.push_back("er: replay_batch must be >= 0");
    if (c.er.lambda < 0.0) errors.push_back("er: lambda must be >= 0");
  }
  return errors;
}

std::unique_ptr<Learner> make_learner(const ExperimentConfig& c, uint64_t seed, int input_dim) {
  TcnConfig cfg;
  cfg.num_blocks = c.num_blocks;
  cfg.filters = c.filters;
  cfg.kernel_size = c.kernel_size;
  cfg.lookback = c.lookback;
  cfg.horizon = c.horizon;
  cfg.input_dim = input_dim;
  AdamWOptions opt;
  opt.lr = c.lr;
  opt.weight_decay = c.weight_decay;

  if (c.learner == "onlinetcn") return std::make_unique<OnlineTcnLearner>(cfg, seed, opt);
  if (c.learner == "er") return std::make_unique<ErLearner>(cfg, seed, opt, c.er);
  if (c.learner == "fsnet") return make_variant(FsnetVariant::Full, cfg, seed, c.fsnet, opt);
  if (c.learner == "fsnet-nomem") {
    return make_variant(FsnetVariant::NoMemory, cfg, seed, c.fsnet, opt);
  }
  if (c.learner == "fsnet-naive") return make_variant(FsnetVariant::Naive, cfg, seed, c.fsnet, opt);
  if (c.learner == "fsnet-large") {
    return make_variant(FsnetVariant::LargeMemory, cfg, seed, c.fsnet, opt);
  }
  throw std::invalid_argument("unknown learner \"" + c.learner + "\"");
}

Series build_series(const DataSpec& spec, uint64_t seed) {
  if (spec.kind == "s-abrupt") return gen_s_abrupt(derive_seed(seed, "data"));
  if (spec.kind == "s-gradual") return gen_s_gradual(derive_seed(seed, "data"));
  if (spec.kind == "ar1") {
    return Series::univariate(gen_ar1(spec.phi, spec.length, derive_seed(seed, "data")));
  }
  if (spec.kind == "csv") return load_csv(spec.path, spec.feature_columns);
  throw std::invalid_argument("unknown data kind \"" + spec.kind + "\"");
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  ExperimentConfig canon = config;
  canon.out_dir.clear();
  canon.verbose = false;
  canon.threads = 1;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(canon).dump())));
  return buf;
}

void aggregate(ExperimentResult& r) {
  const size_t n = r.seeds.size();
  if (n == 0) return;
  double sm = 0.0, sa = 0.0;
  for (const SeedResult& s : r.seeds) {
    sm += s.cum_mse;
    sa += s.cum_mae;
  }
  r.mean_mse = sm / static_cast<double>(n);
  r.mean_mae = sa / static_cast<double>(n);
  double vm = 0.0, va = 0.0;
  for (const SeedResult& s : r.seeds) {
    vm += (s.cum_mse - r.mean_mse) * (s.cum_mse - r.mean_mse);
    va += (s.cum_mae - r.mean_mae) * (s.cum_mae - r.mean_mae);
  }
  r.std_mse = n > 1 ? std::sqrt(vm / static_cast<double>(n - 1)) : 0.0;
  r.std_mae = n > 1 ? std::sqrt(va / static_cast<double>(n - 1)) : 0.0;
}

namespace {

SeedResult run_one_seed(const ExperimentConfig& config, uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();

  Series raw = build_series(config.data, seed);
  SplitResult split = split_and_normalize(raw, config.warmup_ratio);
  std::unique_ptr<Learner> learner = make_learner(config, seed, static_cast<int>(raw.cols));

  SeedResult result;
  result.seed = seed;

  std::ostringstream metrics_buf, curve_buf, trigger_buf;
  RunSinks warm_sinks;
  RunSinks online_sinks;
  if (config.verbose) {
    warm_sinks.triggers = &trigger_buf;
    online_sinks.triggers = &trigger_buf;
  }
  if (!config.out_dir.empty()) {
    online_sinks.metrics = &metrics_buf;
    online_sinks.curve = &curve_buf;
    curve_buf << "step,cum_mse\n";
  }

  if (split.warmup.rows >= config.lookback + config.horizon) {
    WindowIterator warm(split.warmup, config.lookback, config.horizon);
    WarmupStats ws = warmup_train(*learner, warm, warm_sinks);
    result.warmup_steps = ws.steps;
    result.warmup_triggers = ws.trigger_events;
  }

  online_sinks.trigger_step_offset = result.warmup_steps;
  WindowIterator online(split.online, config.lookback, config.horizon);
  RunMetrics metrics = online_run(*learner, online, online_sinks);

  result.cum_mse = metrics.cum_mse;
  result.cum_mae = metrics.cum_mae;
  result.online_steps = metrics.steps;
  result.online_triggers = metrics.total_triggers();
  result.trigger_counts = metrics.trigger_counts;
  result.diverged = metrics.diverged;

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const std::string base = config.out_dir + "/";
    const std::string tag = "seed" + std::to_string(seed);
    atomic_write(base + "metrics_" + tag + ".jsonl", metrics_buf.str());
    atomic_write(base + "curve_" + tag + ".csv", curve_buf.str());
    if (config.verbose) atomic_write(base + "triggers_" + tag + ".jsonl", trigger_buf.str());
  }

  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto errors = validate_config(config);
  if (!errors.empty()) {
    std::string msg = "invalid experiment config:";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentResult result;
  result.config = config;
  result.config_hash = config_hash(config);
  result.seeds.resize(config.seeds.size());

  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(config.seeds.size())));
  if (workers == 1) {
    for (size_t i = 0; i < config.seeds.size(); ++i) {
      result.seeds[i] = run_one_seed(config, config.seeds[i]);
    }
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::string> failures(config.seeds.size());
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < config.seeds.size(); i = next.fetch_add(1)) {
          try {
            result.seeds[i] = run_one_seed(config, config.seeds[i]);
          } catch (const std::exception& e) {
            failures[i] = e.what();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::string& f : failures) {
      if (!f.empty()) throw std::runtime_error("seed run failed: " + f);
    }
  }

  aggregate(result);
  {
    const Series raw = build_series(config.data, config.seeds.front());
    const auto probe = make_learner(config, config.seeds.front(), static_cast<int>(raw.cols));
    result.param_counts = probe->param_counts();
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    atomic_write(config.out_dir + "/summary.json", result_to_json(result).dump(2) + "\n");
  }
  return result;
}

}  // namespace fsnet
