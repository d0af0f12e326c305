#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsnet/fsnet.hpp"
#include "fsnet/learner.hpp"

namespace fsnet {

struct StepRecord {
  int64_t step = 0;
  double mse = 0.0;
  double mae = 0.0;
  double cum_mse = 0.0;
  double cum_mae = 0.0;
};

// Cumulative evaluation over the online rounds. The accumulators follow the
// exact running-mean recurrence m_T = m_{T-1} + (x_T - m_{T-1})/T.
struct RunMetrics {
  int64_t steps = 0;
  double cum_mse = 0.0;
  double cum_mae = 0.0;
  std::vector<double> step_losses;
  std::vector<StepRecord> records;
  std::vector<int64_t> trigger_counts;  // per layer, memory reads performed
  bool diverged = false;
  std::string divergence_message;

  void add(double mse, double mae);
  int64_t total_triggers() const;
};

struct RunSinks {
  std::ostream* metrics = nullptr;   // one JSON record per step
  std::ostream* triggers = nullptr;  // one JSON record per step per layer
  std::ostream* curve = nullptr;     // "step,cum_mse" CSV
  int64_t trigger_step_offset = 0;   // global step numbering base for the trigger log
};

struct WarmupStats {
  int64_t steps = 0;
  int64_t trigger_events = 0;
};

// Warm-up phase: one sequential pass, training only (no metric accounting).
// Fast-learning state evolves exactly as in the online phase.
WarmupStats warmup_train(Learner& learner, WindowIterator& samples, RunSinks sinks = {});

// Online protocol: for each round forecast first with the current
// parameters, score against the revealed target, then train on the sample.
// Divergence aborts the loop with everything recorded so far flushed.
RunMetrics online_run(Learner& learner, WindowIterator& samples, RunSinks sinks = {});

struct DataSpec {
  std::string kind = "s-abrupt";  // s-abrupt | s-gradual | ar1 | csv
  double phi = 0.6;               // ar1 only
  int64_t length = 6000;          // ar1 only
  std::string path;               // csv only
  std::vector<std::string> feature_columns;
};

struct ExperimentConfig {
  DataSpec data;
  std::string learner = "fsnet";
  int horizon = 1;
  int lookback = 60;
  double warmup_ratio = 0.25;
  int num_blocks = 10;
  int filters = 64;
  int kernel_size = 3;
  double lr = 1e-3;
  double weight_decay = 0.0;
  FsnetHyperparams fsnet;
  ErOptions er;
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::string out_dir;  // empty: keep results in memory only
  bool verbose = false;
  int threads = 1;
};

// Collects every problem instead of stopping at the first one.
std::vector<std::string> validate_config(const ExperimentConfig& config);

std::unique_ptr<Learner> make_learner(const ExperimentConfig& config, uint64_t seed,
                                      int input_dim = 1);

// Builds the raw series for one seed (generators are reseeded per seed; CSV
// data is identical across seeds).
Series build_series(const DataSpec& spec, uint64_t seed);

struct SeedResult {
  uint64_t seed = 0;
  double cum_mse = 0.0;
  double cum_mae = 0.0;
  int64_t warmup_steps = 0;
  int64_t online_steps = 0;
  int64_t warmup_triggers = 0;
  int64_t online_triggers = 0;
  std::vector<int64_t> trigger_counts;
  double wall_time_s = 0.0;
  bool diverged = false;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string config_hash;
  std::vector<SeedResult> seeds;
  double mean_mse = 0.0;
  double std_mse = 0.0;
  double mean_mae = 0.0;
  double std_mae = 0.0;
  ParamCounts param_counts;
  double wall_time_s = 0.0;
};

// Full protocol per seed: build data, 25:75 split with warm-up
// z-normalization, warm-up pass, online run, file emission. Seeds run on
// `config.threads` workers; each cell owns its state and writes its files
// atomically.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Aggregates mean / sample std over the per-seed results.
void aggregate(ExperimentResult& result);

uint64_t fnv1a64(const std::string& s);
std::string config_hash(const ExperimentConfig& config);

}  // namespace fsnet
