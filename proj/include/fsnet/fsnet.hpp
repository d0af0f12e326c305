#pragma once

#include "fsnet/learner.hpp"

namespace fsnet {

enum class FsnetVariant {
  Full,         // adapter + sparse associative memory (N = mem_items)
  NoMemory,     // adapter only; trigger and memory paths disabled
  Naive,        // free per-layer coefficients trained jointly with the backbone
  LargeMemory,  // Full with N = 128
};

std::string variant_name(FsnetVariant v);

// Fast-learning registers of one backbone block.
struct LayerFastState {
  Tensor g_hat;        // slow gradient EMA (gamma)
  Tensor g_hat_prime;  // fast gradient EMA (gamma')
  Tensor u_hat;        // EMA of the raw coefficient deviations (gamma')
  Tensor memory;       // [N x d]
  bool memory_written = false;
  bool trigger = false;
  double last_cosine = 0.0;
};

// The fast-and-slow learner. Per step: map each block's gradient EMA to
// adaptation coefficients (with a sparse memory interaction when the block's
// trigger flag is armed), run the adapted forecaster, backpropagate, update
// every trainable tensor with AdamW, then refresh the EMAs and re-evaluate
// the trigger condition for the next step.
class FsnetLearner : public Learner {
 public:
  FsnetLearner(const TcnConfig& config, uint64_t seed, FsnetVariant variant = FsnetVariant::Full,
               FsnetHyperparams hp = {}, AdamWOptions opt = {});

  StepReport step(const StreamSample& sample) override;
  Checkpoint snapshot() const override;
  ParamCounts param_counts() const override;
  std::string name() const override { return variant_name(variant_); }
  int layer_count() const override { return state_.config.num_blocks; }
  const TcnState& backbone() const override { return state_; }
  TcnState& mutable_backbone() { return state_; }

  FsnetVariant variant() const { return variant_; }
  const FsnetHyperparams& hyperparams() const { return hp_; }
  const std::vector<LayerFastState>& fast_states() const { return fast_; }
  const std::vector<AdapterParams>& adapters() const { return adapters_; }
  const std::vector<Tensor>& naive_coeffs() const { return naive_u_; }
  // Zeroes the adapter output map; the learner then reduces to OnlineTCN.
  void force_identity_adapters();

 private:
  bool uses_adapter() const { return variant_ != FsnetVariant::Naive; }
  bool uses_memory() const {
    return variant_ == FsnetVariant::Full || variant_ == FsnetVariant::LargeMemory;
  }
  Tensor flatten_block_grads(const BlockGrads& g) const;

  FsnetVariant variant_;
  FsnetHyperparams hp_;
  TcnState state_;
  std::vector<AdapterParams> adapters_;   // empty for Naive
  std::vector<LayerFastState> fast_;      // empty for Naive
  std::vector<Tensor> naive_u_;           // Naive only: free coefficients, init 1
  AdamW opt_;          // backbone, regressor and (Naive) coefficients
  AdamW adapter_opt_;  // adapter maps, with their own decay
};

// Factory over the ablation variants, N fixed per kind.
std::unique_ptr<FsnetLearner> make_variant(FsnetVariant kind, const TcnConfig& config,
                                           uint64_t seed, FsnetHyperparams hp = {},
                                           AdamWOptions opt = {});

}  // namespace fsnet
