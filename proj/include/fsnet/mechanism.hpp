#pragma once

#include <vector>

#include "fsnet/rng.hpp"
#include "fsnet/tensor.hpp"

namespace fsnet {

struct FsnetHyperparams {
  double gamma = 0.9;        // slow gradient EMA coefficient
  double gamma_prime = 0.3;  // fast gradient EMA / coefficient EMA
  double tau = 0.75;         // trigger threshold and read/write decay
  int top_k = 2;
  int mem_items = 32;        // N
  int adapter_hidden = 32;
  // L2 cap on the per-layer gradient entering the EMA registers. The
  // coefficient map is linear in the gradient EMA, so one large loss spike
  // would otherwise feed back multiplicatively through the adapted weights
  // and overflow within a few steps. 0 disables the cap.
  double grad_clip = 2.0;
  // Optional decoupled weight decay on the adapter maps only, tethering the
  // fast weights toward the identity adaptation.
  double adapter_weight_decay = 0.0;

  void validate() const;
};

// coeff * prev + (1 - coeff) * current.
Tensor ema_update(const Tensor& prev, const Tensor& current, double coeff);

// Chunked two-layer adapter. W1 is shared across the chunks of one layer;
// the final chunk is zero-padded when the gradient length is not divisible
// by the coefficient dimension.
struct AdapterParams {
  Tensor w1;       // [hidden x chunk_size]
  Tensor w2;       // [hidden] (the 1 x hidden output map)
  int64_t coeff_dim = 0;   // d
  int64_t grad_dim = 0;    // flattened gradient length this adapter expects
  int64_t chunk_size = 0;  // ceil(grad_dim / d)

  // w2 starts at zero so a fresh network adapts with exact identity.
  static AdapterParams init(int64_t grad_dim, int64_t coeff_dim, int64_t hidden, Rng& rng);
  int64_t param_count() const { return w1.size() + w2.size(); }
};

// Omega(g_hat; phi): the raw coefficient deviations (no identity offset).
Tensor adapter_raw(const Tensor& g_hat, const AdapterParams& params);

// 1 + Omega(g_hat; phi): the multipliers actually applied to the layer.
Tensor adapter_forward(const Tensor& g_hat, const AdapterParams& params);

struct AdapterGrads {
  Tensor w1;
  Tensor w2;
};
// Backprop of grad_u (w.r.t. the raw deviations) into the adapter weights;
// g_hat is an EMA register and is treated as a constant.
AdapterGrads adapter_backward(const Tensor& grad_u, const Tensor& g_hat,
                              const AdapterParams& params);

// cos(g_hat, g_hat') < -tau, with an epsilon guard so zero vectors never fire.
double gradient_cosine(const Tensor& g_hat, const Tensor& g_hat_prime);
bool trigger_check(const Tensor& g_hat, const Tensor& g_hat_prime, double tau);

// Sparse attention over the memory rows: full softmax of M * u_hat, then the
// top-k rows by weight (ties broken by the lowest row index). Weights are the
// raw softmax values; no renormalization over the selected set.
struct SparseAttention {
  std::vector<int> rows;
  std::vector<double> weights;
};
SparseAttention memory_attention(const Tensor& memory, const Tensor& u_hat, int k);

struct MemoryReadResult {
  Tensor u_tilde;  // [d]
  SparseAttention attention;
};
// written=false models the cold store before the first write: the read
// returns a zero deviation and an empty attention set.
MemoryReadResult memory_read(const Tensor& memory, const Tensor& u_hat, int k,
                             bool written = true);

// M <- tau*M + (1-tau)*(u_hat outer r_k), then each row clipped to unit norm.
Tensor memory_write(const Tensor& memory, const Tensor& u_hat, const SparseAttention& r_k,
                    double tau);

}  // namespace fsnet
