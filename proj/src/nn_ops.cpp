#include "fsnet/nn_ops.hpp"

namespace fsnet {

namespace {

void check_conv_shapes(const Tensor& input, const ConvParams& params) {
  if (params.weight.ndim() != 3) {
    throw ShapeError("conv1d: weight must be [C_out x C_in x K], got " + shape_str(params.weight));
  }
  if (params.bias.ndim() != 1 || params.bias.dim(0) != params.out_channels()) {
    throw ShapeError("conv1d: bias dimension " + shape_str(params.bias) + " does not match C_out=" +
                     std::to_string(params.out_channels()));
  }
  if (input.ndim() != 2) {
    throw ShapeError("conv1d: input must be [C_in x T], got " + shape_str(input));
  }
  if (input.dim(0) != params.in_channels()) {
    throw ShapeError("conv1d: input channel dimension " + std::to_string(input.dim(0)) +
                     " does not match weight C_in=" + std::to_string(params.in_channels()));
  }
  if (params.dilation < 1 || params.kernel() < 1) {
    throw ShapeError("conv1d: dilation and kernel width must be >= 1");
  }
  if (input.dim(1) < 1) {
    throw ShapeError("conv1d: time dimension T must be >= 1");
  }
}

}  // namespace

Tensor dilated_causal_conv1d(const Tensor& input, const ConvParams& params) {
  check_conv_shapes(input, params);
  const int64_t c_out = params.out_channels();
  const int64_t c_in = params.in_channels();
  const int64_t k = params.kernel();
  const int64_t t_len = input.dim(1);
  const int64_t dil = params.dilation;

  Tensor out({c_out, t_len});
  const double* in = input.data();
  const double* w = params.weight.data();
  double* o = out.data();
  for (int64_t co = 0; co < c_out; ++co) {
    double* orow = o + co * t_len;
    const double b = params.bias(co);
    for (int64_t t = 0; t < t_len; ++t) orow[t] = b;
    for (int64_t ci = 0; ci < c_in; ++ci) {
      const double* irow = in + ci * t_len;
      const double* wrow = w + (co * c_in + ci) * k;
      // Kernel tap kk reads input at t - (K-1-kk)*dilation; indices below
      // zero fall into the implicit left zero-padding. The K=3 and K=2
      // shapes get fused single-pass loops; anything else goes per tap.
      if (k == 3) {
        const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
        const int64_t o1 = dil, o2 = 2 * dil;
        int64_t t = 0;
        for (; t < o1 && t < t_len; ++t) orow[t] += w2 * irow[t];
        for (; t < o2 && t < t_len; ++t) orow[t] += w2 * irow[t] + w1 * irow[t - o1];
        for (; t < t_len; ++t) {
          orow[t] += w2 * irow[t] + w1 * irow[t - o1] + w0 * irow[t - o2];
        }
      } else if (k == 2) {
        const double w0 = wrow[0], w1 = wrow[1];
        int64_t t = 0;
        for (; t < dil && t < t_len; ++t) orow[t] += w1 * irow[t];
        for (; t < t_len; ++t) orow[t] += w1 * irow[t] + w0 * irow[t - dil];
      } else {
        for (int64_t kk = 0; kk < k; ++kk) {
          const int64_t off = (k - 1 - kk) * dil;
          const double wv = wrow[kk];
          if (wv == 0.0) continue;
          for (int64_t t = off; t < t_len; ++t) orow[t] += wv * irow[t - off];
        }
      }
    }
  }
  require_finite(out, "dilated_causal_conv1d");
  return out;
}

ConvGrads dilated_causal_conv1d_backward(const Tensor& grad_out, const Tensor& input,
                                         const ConvParams& params, int64_t active_from) {
  check_conv_shapes(input, params);
  const int64_t c_out = params.out_channels();
  const int64_t c_in = params.in_channels();
  const int64_t k = params.kernel();
  const int64_t t_len = input.dim(1);
  const int64_t dil = params.dilation;
  if (grad_out.ndim() != 2 || grad_out.dim(0) != c_out || grad_out.dim(1) != t_len) {
    throw ShapeError("conv1d_backward: grad_out " + shape_str(grad_out) + " does not match output [" +
                     std::to_string(c_out) + "x" + std::to_string(t_len) + "]");
  }
  const int64_t active = std::clamp<int64_t>(active_from, 0, t_len);

  ConvGrads g{Tensor({c_in, t_len}), Tensor(params.weight.shape()), Tensor({c_out})};
  const double* go = grad_out.data();
  const double* in = input.data();
  const double* w = params.weight.data();
  double* gi = g.input.data();
  double* gw = g.weight.data();

  for (int64_t co = 0; co < c_out; ++co) {
    const double* gorow = go + co * t_len;
    double b = 0.0;
    for (int64_t t = active; t < t_len; ++t) b += gorow[t];
    g.bias(co) = b;
    for (int64_t ci = 0; ci < c_in; ++ci) {
      const double* irow = in + ci * t_len;
      double* girow = gi + ci * t_len;
      const double* wrow = w + (co * c_in + ci) * k;
      double* gwrow = gw + (co * c_in + ci) * k;
      if (k == 3) {
        // grad_input[s] += sum_k w_k * grad_out[s + off_k], one fused pass.
        // Columns of grad_out before `active` are zero, so start where the
        // widest tap first reaches a live column.
        const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
        const int64_t o1 = dil, o2 = 2 * dil;
        int64_t s = std::max<int64_t>(0, active - o2);
        for (; s + o2 < t_len; ++s) {
          girow[s] += w2 * gorow[s] + w1 * gorow[s + o1] + w0 * gorow[s + o2];
        }
        for (; s + o1 < t_len; ++s) girow[s] += w2 * gorow[s] + w1 * gorow[s + o1];
        for (; s < t_len; ++s) girow[s] += w2 * gorow[s];
        // grad_weight[k] = sum_s grad_out[s + off_k] * input[s]; partial sums
        // keep the three reductions vectorizable.
        for (int64_t kk = 0; kk < 3; ++kk) {
          const int64_t off = (k - 1 - kk) * dil;
          const int64_t n = t_len - off;
          const int64_t s0 = std::max<int64_t>(0, active - off);
          const double* gsrc = gorow + off;
          double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
          int64_t t = s0;
          for (; t + 4 <= n; t += 4) {
            a0 += gsrc[t] * irow[t];
            a1 += gsrc[t + 1] * irow[t + 1];
            a2 += gsrc[t + 2] * irow[t + 2];
            a3 += gsrc[t + 3] * irow[t + 3];
          }
          for (; t < n; ++t) a0 += gsrc[t] * irow[t];
          gwrow[kk] = (a0 + a1) + (a2 + a3);
        }
      } else {
        for (int64_t kk = 0; kk < k; ++kk) {
          const int64_t off = (k - 1 - kk) * dil;
          const int64_t n = t_len - off;
          const int64_t s0 = std::max<int64_t>(0, active - off);
          const double* gsrc = gorow + off;
          const double wv = wrow[kk];
          double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
          int64_t t = s0;
          for (; t + 4 <= n; t += 4) {
            a0 += gsrc[t] * irow[t];
            a1 += gsrc[t + 1] * irow[t + 1];
            a2 += gsrc[t + 2] * irow[t + 2];
            a3 += gsrc[t + 3] * irow[t + 3];
            girow[t] += wv * gsrc[t];
            girow[t + 1] += wv * gsrc[t + 1];
            girow[t + 2] += wv * gsrc[t + 2];
            girow[t + 3] += wv * gsrc[t + 3];
          }
          for (; t < n; ++t) {
            a0 += gsrc[t] * irow[t];
            girow[t] += wv * gsrc[t];
          }
          gwrow[kk] = (a0 + a1) + (a2 + a3);
        }
      }
    }
  }
  return g;
}

Tensor linear_forward(const Tensor& x, const LinearParams& params) {
  if (x.ndim() != 1 || x.dim(0) != params.in_dim()) {
    throw ShapeError("linear: input " + shape_str(x) + " does not match weight D_in=" +
                     std::to_string(params.in_dim()));
  }
  const int64_t d_out = params.out_dim();
  const int64_t d_in = params.in_dim();
  Tensor out({d_out});
  const double* w = params.weight.data();
  for (int64_t i = 0; i < d_out; ++i) {
    double acc = params.bias(i);
    const double* wrow = w + i * d_in;
    for (int64_t j = 0; j < d_in; ++j) acc += wrow[j] * x(j);
    out(i) = acc;
  }
  require_finite(out, "linear_forward");
  return out;
}

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& x, const LinearParams& params) {
  if (grad_out.ndim() != 1 || grad_out.dim(0) != params.out_dim()) {
    throw ShapeError("linear_backward: grad_out " + shape_str(grad_out) + " does not match D_out=" +
                     std::to_string(params.out_dim()));
  }
  if (x.ndim() != 1 || x.dim(0) != params.in_dim()) {
    throw ShapeError("linear_backward: input " + shape_str(x) + " does not match D_in=" +
                     std::to_string(params.in_dim()));
  }
  const int64_t d_out = params.out_dim();
  const int64_t d_in = params.in_dim();
  LinearGrads g{Tensor({d_in}), Tensor({d_out, d_in}), Tensor({d_out})};
  const double* w = params.weight.data();
  double* gw = g.weight.data();
  for (int64_t i = 0; i < d_out; ++i) {
    const double go = grad_out(i);
    g.bias(i) = go;
    const double* wrow = w + i * d_in;
    double* gwrow = gw + i * d_in;
    for (int64_t j = 0; j < d_in; ++j) {
      gwrow[j] = go * x(j);
      g.input(j) += go * wrow[j];
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out(i) = x(i) > 0.0 ? x(i) : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& pre) {
  require_same_shape(grad_out, pre, "relu_backward");
  Tensor out(pre.shape());
  for (int64_t i = 0; i < pre.size(); ++i) out(i) = pre(i) > 0.0 ? grad_out(i) : 0.0;
  return out;
}

Tensor elementwise_mul_forward(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_mul");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out(i) = a(i) * b(i);
  return out;
}

std::pair<Tensor, Tensor> elementwise_mul_backward(const Tensor& grad_out, const Tensor& a,
                                                   const Tensor& b) {
  require_same_shape(grad_out, a, "elementwise_mul_backward");
  require_same_shape(a, b, "elementwise_mul_backward");
  Tensor ga(a.shape()), gb(b.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    ga(i) = grad_out(i) * b(i);
    gb(i) = grad_out(i) * a(i);
  }
  return {ga, gb};
}

}  // namespace fsnet
