#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fsnet/backbone.hpp"
#include "fsnet/data.hpp"
#include "fsnet/mechanism.hpp"
#include "fsnet/optimizer.hpp"

namespace fsnet {

// Raised when a training step produces a non-finite loss; carries a dump of
// per-layer parameter norms for the abort diagnostics.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct LayerStepInfo {
  double cosine = 0.0;       // cos(g_hat, g_hat') after this step's EMA update
  bool triggered = false;    // trigger flag armed for the next step
  bool read_performed = false;  // a memory read/write happened this step
  SparseAttention attention;    // rows/weights of that read
};

struct StepReport {
  Tensor forecast;  // produced before any parameter update
  double loss = 0.0;
  std::vector<LayerStepInfo> layers;
};

// Floating-point budget broken down by component.
struct ParamCounts {
  int64_t backbone = 0;
  int64_t adapter = 0;
  int64_t g_ema = 0;
  int64_t assoc_memory = 0;
  int64_t episodic_buffer = 0;
  int64_t total() const { return backbone + adapter + g_ema + assoc_memory + episodic_buffer; }
};

// Versioned model snapshot: config plus every parameter tensor by name.
struct Checkpoint {
  int version = 1;
  std::string kind;
  TcnConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

// Common protocol for every strategy: one predict-then-train transition per
// sample. The report's forecast is always computed from the pre-update
// parameters.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual StepReport step(const StreamSample& sample) = 0;
  virtual Checkpoint snapshot() const = 0;
  virtual ParamCounts param_counts() const = 0;
  virtual std::string name() const = 0;
  virtual int layer_count() const = 0;
  virtual const TcnState& backbone() const = 0;
};

std::vector<std::pair<std::string, Tensor>> named_backbone_tensors(const TcnState& state);

// Plain online gradient descent on the TCN backbone.
class OnlineTcnLearner : public Learner {
 public:
  OnlineTcnLearner(const TcnConfig& config, uint64_t seed, AdamWOptions opt = {});

  StepReport step(const StreamSample& sample) override;
  Checkpoint snapshot() const override;
  ParamCounts param_counts() const override;
  std::string name() const override { return "onlinetcn"; }
  int layer_count() const override { return state_.config.num_blocks; }
  const TcnState& backbone() const override { return state_; }
  TcnState& mutable_backbone() { return state_; }

 private:
  TcnState state_;
  AdamW opt_;
};

// Fixed-capacity uniform sample of an unbounded stream.
class ReservoirBuffer {
 public:
  ReservoirBuffer(int capacity, uint64_t seed);

  void insert(StreamSample sample);
  bool empty() const { return items_.empty(); }
  size_t size() const { return items_.size(); }
  int capacity() const { return capacity_; }
  uint64_t seen_count() const { return seen_; }
  const std::vector<StreamSample>& items() const { return items_; }

  // Uniform draw without replacement (all items when fewer than k).
  std::vector<const StreamSample*> sample_batch(int k, Rng& rng) const;

 private:
  int capacity_;
  uint64_t seen_ = 0;
  std::vector<StreamSample> items_;
  Rng rng_;
};

struct ErOptions {
  int buffer_capacity = 500;
  int replay_batch = 8;
  double lambda = 0.2;
};

// Experience replay over the plain TCN: current-sample loss plus
// lambda-weighted losses over a replay mini-batch, one combined gradient
// step, then a reservoir insert of the current sample.
class ErLearner : public Learner {
 public:
  ErLearner(const TcnConfig& config, uint64_t seed, AdamWOptions opt = {}, ErOptions er = {});

  StepReport step(const StreamSample& sample) override;
  Checkpoint snapshot() const override;
  ParamCounts param_counts() const override;
  std::string name() const override { return "er"; }
  int layer_count() const override { return state_.config.num_blocks; }
  const TcnState& backbone() const override { return state_; }
  const ReservoirBuffer& buffer() const { return buffer_; }

 private:
  TcnState state_;
  AdamW opt_;
  ErOptions er_;
  ReservoirBuffer buffer_;
  Rng replay_rng_;
};

}  // namespace fsnet
