#pragma once

#include <optional>
#include <vector>

#include "fsnet/nn_ops.hpp"
#include "fsnet/rng.hpp"
#include "fsnet/tensor.hpp"

namespace fsnet {

struct TcnConfig {
  int num_blocks = 10;
  int filters = 64;
  int kernel_size = 3;
  int input_dim = 1;  // n
  int lookback = 60;  // E
  int horizon = 1;    // H

  int dilation_for(int block) const { return 1 << block; }
  void validate() const;
};

// Per-channel multipliers for one block: alpha scales the conv weights and
// bias (the bias transform is absorbed into alpha), beta scales the conv
// output feature map. Packed layout is u = [alpha_w ; alpha_b ; beta].
struct AdaptationCoefficients {
  Tensor alpha_w;  // [C_out]
  Tensor alpha_b;  // [C_out]
  Tensor beta;     // [C_out]

  static AdaptationCoefficients identity(int64_t c_out);
  static AdaptationCoefficients from_packed(const Tensor& u);
  Tensor packed() const;
  int64_t channels() const { return alpha_w.dim(0); }
};

inline int64_t coeff_dim_for_channels(int64_t c_out) { return 3 * c_out; }

// One residual block: two dilated causal convs with a ReLU between them and
// an identity skip (1x1 projection only when channel counts differ).
struct TcnBlock {
  ConvParams conv1;
  ConvParams conv2;
  std::optional<ConvParams> proj;

  int64_t adapted_param_count() const { return conv1.param_count() + conv2.param_count(); }
};

struct TcnState {
  TcnConfig config;
  ConvParams input_proj;  // K=1 conv lifting n channels to `filters`
  std::vector<TcnBlock> blocks;
  LinearParams regressor;  // maps h_T [filters] to the flattened H*n forecast
  uint64_t version = 0;    // bumped on every parameter mutation; guards stale caches

  static TcnState init(const TcnConfig& config, Rng& rng);
  void bump() { ++version; }
  int64_t param_count() const;
};

struct BlockCache {
  Tensor in;   // block input [F x T]
  Tensor a1;   // conv1 output before feature scaling
  Tensor f1;   // after beta scaling (equals a1 when unadapted)
  Tensor r1;   // relu(f1)
  Tensor a2;   // conv2 output before feature scaling
  Tensor out;  // f2 + skip
};

struct ForwardCache {
  Tensor input;      // [n x E]
  Tensor proj_out;   // [F x E]
  std::vector<BlockCache> blocks;
  Tensor h_last;     // final features at the last time step [F]
  Tensor forecast;   // [H x n]
  bool adapted = false;
  std::vector<AdaptationCoefficients> coeffs;  // per block, used during forward
  uint64_t version = 0;
};

struct BlockGrads {
  Tensor w1, b1;  // gradients w.r.t. the UNADAPTED conv parameters
  Tensor w2, b2;
  Tensor alpha_w, alpha_b, beta;  // gradients w.r.t. the adaptation coefficients
};

struct BackboneGrads {
  Tensor input_proj_w, input_proj_b;
  std::vector<BlockGrads> blocks;
  Tensor regressor_w, regressor_b;
};

// tile(alpha) ⊙ theta: weight rows of output channel c scaled by alpha_w[c],
// bias entries by alpha_b[c].
ConvParams adapt_conv_params(const ConvParams& p, const AdaptationCoefficients& u);

// tile(beta) ⊙ h for a [C x T] feature map.
Tensor scale_channels(const Tensor& h, const Tensor& beta);

// Single-conv adaptation step: adapted params, convolution, feature scaling.
std::pair<Tensor, ConvParams> adapt_layer(const ConvParams& theta, const Tensor& h_in,
                                          const AdaptationCoefficients& u);

// Full forecaster pass. When `adaptation` is supplied it must hold one
// coefficient pack per block; alpha scales both convs' weights/biases and
// beta scales both convs' outputs (the skip path and the 1x1 projection are
// not adapted).
ForwardCache backbone_forward(const Tensor& x, const TcnState& state,
                              const std::vector<AdaptationCoefficients>* adaptation = nullptr);

// Gradients of the loss w.r.t. every trainable tensor plus the adaptation
// coefficients. Conv gradients are taken w.r.t. the unadapted weights by
// chain rule through tile(alpha) ⊙ theta.
BackboneGrads backbone_backward(const TcnState& state, const ForwardCache& cache,
                                const Tensor& grad_forecast);

// l2 forecast loss: (1/H) * sum_i ||yhat_i - y_i||^2, grad = 2(yhat-y)/H.
std::pair<double, Tensor> mse_loss(const Tensor& yhat, const Tensor& y);

// Evaluation metrics on the element level (mean over the H*n entries).
double mse_metric(const Tensor& yhat, const Tensor& y);
double mae_metric(const Tensor& yhat, const Tensor& y);

}  // namespace fsnet
