#include "fsnet/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fsnet {

void FsnetHyperparams::validate() const {
  if (!(gamma_prime > 0.0 && gamma_prime < gamma && gamma < 1.0)) {
    throw std::invalid_argument("FsnetHyperparams: need 0 < gamma' < gamma < 1");
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("FsnetHyperparams: need 0 < tau <= 1");
  }
  if (top_k < 1 || top_k > mem_items) {
    throw std::invalid_argument("FsnetHyperparams: need 1 <= top_k <= mem_items");
  }
  if (adapter_hidden < 1) {
    throw std::invalid_argument("FsnetHyperparams: adapter_hidden must be >= 1");
  }
  if (grad_clip < 0.0) {
    throw std::invalid_argument("FsnetHyperparams: grad_clip must be >= 0");
  }
  if (adapter_weight_decay < 0.0) {
    throw std::invalid_argument("FsnetHyperparams: adapter_weight_decay must be >= 0");
  }
}

Tensor ema_update(const Tensor& prev, const Tensor& current, double coeff) {
  require_same_shape(prev, current, "ema_update");
  Tensor out(prev.shape());
  for (int64_t i = 0; i < prev.size(); ++i) out(i) = coeff * prev(i) + (1.0 - coeff) * current(i);
  return out;
}

AdapterParams AdapterParams::init(int64_t grad_dim, int64_t coeff_dim, int64_t hidden, Rng& rng) {
  if (grad_dim < 1 || coeff_dim < 1 || hidden < 1) {
    throw std::invalid_argument("AdapterParams: dimensions must be >= 1");
  }
  AdapterParams p;
  p.grad_dim = grad_dim;
  p.coeff_dim = coeff_dim;
  p.chunk_size = (grad_dim + coeff_dim - 1) / coeff_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.chunk_size));
  p.w1 = Tensor({hidden, p.chunk_size});
  for (int64_t i = 0; i < p.w1.size(); ++i) p.w1(i) = rng.uniform(-bound, bound);
  p.w2 = Tensor({hidden});
  return p;
}

Tensor adapter_raw(const Tensor& g_hat, const AdapterParams& params) {
  if (g_hat.size() != params.grad_dim) {
    throw ShapeError("adapter_raw: gradient length " + std::to_string(g_hat.size()) +
                     " does not match adapter grad_dim=" + std::to_string(params.grad_dim));
  }
  const int64_t d = params.coeff_dim;
  const int64_t cs = params.chunk_size;
  const int64_t hid = params.w1.dim(0);
  // W2 (W1 b_i) = (W2 W1) b_i: collapsing the shared maps into one row
  // vector first turns the whole layer into d short dot products.
  std::vector<double> wq(static_cast<size_t>(cs), 0.0);
  for (int64_t r = 0; r < hid; ++r) {
    const double w2r = params.w2(r);
    const double* wrow = params.w1.data() + r * cs;
    for (int64_t c = 0; c < cs; ++c) wq[static_cast<size_t>(c)] += w2r * wrow[c];
  }
  Tensor u({d});
  for (int64_t i = 0; i < d; ++i) {
    const int64_t base = i * cs;
    // Only the final chunk can run past the gradient (zero padding).
    const int64_t len = std::min(cs, params.grad_dim - base);
    const double* chunk = g_hat.data() + base;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    int64_t c = 0;
    for (; c + 4 <= len; c += 4) {
      a0 += wq[static_cast<size_t>(c)] * chunk[c];
      a1 += wq[static_cast<size_t>(c + 1)] * chunk[c + 1];
      a2 += wq[static_cast<size_t>(c + 2)] * chunk[c + 2];
      a3 += wq[static_cast<size_t>(c + 3)] * chunk[c + 3];
    }
    for (; c < len; ++c) a0 += wq[static_cast<size_t>(c)] * chunk[c];
    u(i) = (a0 + a1) + (a2 + a3);
  }
  return u;
}

Tensor adapter_forward(const Tensor& g_hat, const AdapterParams& params) {
  Tensor u = adapter_raw(g_hat, params);
  for (int64_t i = 0; i < u.size(); ++i) u(i) += 1.0;
  return u;
}

AdapterGrads adapter_backward(const Tensor& grad_u, const Tensor& g_hat,
                              const AdapterParams& params) {
  if (grad_u.size() != params.coeff_dim) {
    throw ShapeError("adapter_backward: grad_u length " + std::to_string(grad_u.size()) +
                     " does not match coeff_dim=" + std::to_string(params.coeff_dim));
  }
  if (g_hat.size() != params.grad_dim) {
    throw ShapeError("adapter_backward: gradient length " + std::to_string(g_hat.size()) +
                     " does not match adapter grad_dim=" + std::to_string(params.grad_dim));
  }
  const int64_t d = params.coeff_dim;
  const int64_t cs = params.chunk_size;
  const int64_t hid = params.w1.dim(0);
  AdapterGrads g{Tensor(params.w1.shape()), Tensor(params.w2.shape())};
  // With u_i = W2 W1 b_i, both gradients factor through v = sum_i du_i b_i:
  // dW1 = W2^T v^T (rank one) and dW2 = (W1 v)^T.
  std::vector<double> v(static_cast<size_t>(cs), 0.0);
  for (int64_t i = 0; i < d; ++i) {
    const int64_t base = i * cs;
    const int64_t len = std::min(cs, params.grad_dim - base);
    const double* chunk = g_hat.data() + base;
    const double du = grad_u(i);
    for (int64_t c = 0; c < len; ++c) v[static_cast<size_t>(c)] += du * chunk[c];
  }
  for (int64_t r = 0; r < hid; ++r) {
    const double* wrow = params.w1.data() + r * cs;
    double* grow = g.w1.data() + r * cs;
    const double w2r = params.w2(r);
    double acc = 0.0;
    for (int64_t c = 0; c < cs; ++c) {
      grow[c] = w2r * v[static_cast<size_t>(c)];
      acc += wrow[c] * v[static_cast<size_t>(c)];
    }
    g.w2(r) = acc;
  }
  return g;
}

double gradient_cosine(const Tensor& g_hat, const Tensor& g_hat_prime) {
  require_same_shape(g_hat, g_hat_prime, "gradient_cosine");
  const double eps = 1e-12;
  const double num = dot(g_hat, g_hat_prime);
  return num / (l2_norm(g_hat) * l2_norm(g_hat_prime) + eps);
}

bool trigger_check(const Tensor& g_hat, const Tensor& g_hat_prime, double tau) {
  return gradient_cosine(g_hat, g_hat_prime) < -tau;
}

SparseAttention memory_attention(const Tensor& memory, const Tensor& u_hat, int k) {
  if (memory.ndim() != 2 || u_hat.ndim() != 1 || memory.dim(1) != u_hat.dim(0)) {
    throw ShapeError("memory_attention: memory " + shape_str(memory) + " vs query " +
                     shape_str(u_hat));
  }
  const int64_t n = memory.dim(0);
  const int64_t d = memory.dim(1);
  if (k < 1 || k > n) throw std::invalid_argument("memory_attention: need 1 <= k <= N");

  std::vector<double> logits(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* row = memory.data() + i * d;
    for (int64_t j = 0; j < d; ++j) acc += row[j] * u_hat(j);
    logits[static_cast<size_t>(i)] = acc;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logits) v /= z;

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (logits[static_cast<size_t>(a)] != logits[static_cast<size_t>(b)]) {
      return logits[static_cast<size_t>(a)] > logits[static_cast<size_t>(b)];
    }
    return a < b;  // ties broken by the lowest row index
  });

  SparseAttention att;
  att.rows.reserve(static_cast<size_t>(k));
  att.weights.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    att.rows.push_back(order[static_cast<size_t>(i)]);
    att.weights.push_back(logits[static_cast<size_t>(order[static_cast<size_t>(i)])]);
  }
  return att;
}

MemoryReadResult memory_read(const Tensor& memory, const Tensor& u_hat, int k, bool written) {
  if (!written) {
    return {Tensor({memory.dim(1)}), SparseAttention{}};
  }
  SparseAttention att = memory_attention(memory, u_hat, k);
  const int64_t d = memory.dim(1);
  Tensor u_tilde({d});
  for (size_t i = 0; i < att.rows.size(); ++i) {
    const double* row = memory.data() + static_cast<int64_t>(att.rows[i]) * d;
    const double w = att.weights[i];
    for (int64_t j = 0; j < d; ++j) u_tilde(j) += w * row[j];
  }
  return {std::move(u_tilde), std::move(att)};
}

Tensor memory_write(const Tensor& memory, const Tensor& u_hat, const SparseAttention& r_k,
                    double tau) {
  if (memory.ndim() != 2 || u_hat.ndim() != 1 || memory.dim(1) != u_hat.dim(0)) {
    throw ShapeError("memory_write: memory " + shape_str(memory) + " vs item " + shape_str(u_hat));
  }
  const int64_t n = memory.dim(0);
  const int64_t d = memory.dim(1);
  Tensor out = scale(memory, tau);
  for (size_t i = 0; i < r_k.rows.size(); ++i) {
    const int64_t row = r_k.rows[i];
    if (row < 0 || row >= n) throw std::invalid_argument("memory_write: row index out of range");
    const double w = (1.0 - tau) * r_k.weights[i];
    double* dst = out.data() + row * d;
    for (int64_t j = 0; j < d; ++j) dst[j] += w * u_hat(j);
  }
  // Row-wise clipping keeps items comparable under dot-product attention.
  for (int64_t i = 0; i < n; ++i) {
    double* row = out.data() + i * d;
    double norm = 0.0;
    for (int64_t j = 0; j < d; ++j) norm += row[j] * row[j];
    norm = std::sqrt(norm);
    if (norm > 1.0) {
      for (int64_t j = 0; j < d; ++j) row[j] /= norm;
    }
  }
  return out;
}

}  // namespace fsnet
