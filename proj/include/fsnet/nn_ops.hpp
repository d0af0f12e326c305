#pragma once

#include <utility>

#include "fsnet/tensor.hpp"

namespace fsnet {

// One dilated causal convolution. weight is [C_out x C_in x K], bias [C_out].
struct ConvParams {
  Tensor weight;
  Tensor bias;
  int dilation = 1;

  int64_t out_channels() const { return weight.dim(0); }
  int64_t in_channels() const { return weight.dim(1); }
  int64_t kernel() const { return weight.dim(2); }
  int64_t param_count() const { return weight.size() + bias.size(); }
};

struct LinearParams {
  Tensor weight;  // [D_out x D_in]
  Tensor bias;    // [D_out]

  int64_t out_dim() const { return weight.dim(0); }
  int64_t in_dim() const { return weight.dim(1); }
  int64_t param_count() const { return weight.size() + bias.size(); }
};

// Causal dilated conv over input [C_in x T] -> [C_out x T]. Causality comes
// from left zero-padding of (K-1)*dilation: output column t only reads input
// columns t' <= t.
Tensor dilated_causal_conv1d(const Tensor& input, const ConvParams& params);

struct ConvGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
// active_from is a sparsity hint: columns of grad_out before it are known to
// be zero (the forecast loss only touches the last time step, so backward
// spans grow block by block). 0 is always valid.
ConvGrads dilated_causal_conv1d_backward(const Tensor& grad_out, const Tensor& input,
                                         const ConvParams& params, int64_t active_from = 0);

// x is a vector [D_in]; returns [D_out].
Tensor linear_forward(const Tensor& x, const LinearParams& params);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
LinearGrads linear_backward(const Tensor& grad_out, const Tensor& x, const LinearParams& params);

Tensor relu_forward(const Tensor& x);
// pre is the input that fed relu_forward; the gradient is masked on pre > 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& pre);

Tensor elementwise_mul_forward(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> elementwise_mul_backward(const Tensor& grad_out, const Tensor& a,
                                                   const Tensor& b);

}  // namespace fsnet
