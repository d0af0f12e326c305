#include "fsnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fsnet/backbone.hpp"
#include "fsnet/mechanism.hpp"
#include "fsnet/nn_ops.hpp"
#include "fsnet/rng.hpp"

namespace fsnet {

bool GradCheckReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

const GradCheckEntry* GradCheckReport::worst() const {
  const GradCheckEntry* w = nullptr;
  for (const auto& e : entries) {
    if (!w || e.max_rel_err > w->max_rel_err) w = &e;
  }
  return w;
}

double fd_max_rel_error(Tensor& param, const Tensor& analytic,
                        const std::function<double()>& loss, double h) {
  require_same_shape(param, analytic, "fd_max_rel_error");
  double worst = 0.0;
  for (int64_t i = 0; i < param.size(); ++i) {
    const double orig = param(i);
    param(i) = orig + h;
    const double up = loss();
    param(i) = orig - h;
    const double down = loss();
    param(i) = orig;
    const double fd = (up - down) / (2.0 * h);
    const double an = analytic(i);
    const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
    worst = std::max(worst, err);
  }
  return worst;
}

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t(i) = rng.uniform(lo, hi);
  return t;
}

// Values kept away from zero so the relu kink never sits within the FD step.
Tensor random_off_kink(std::vector<int64_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(0.2, 1.0);
    t(i) = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

void maybe_corrupt(Tensor& analytic, const std::string& op, const std::string& corrupt_op) {
  if (op == corrupt_op && analytic.size() > 0) {
    analytic(0) = analytic(0) * 1.5 + 0.1;
  }
}

struct SuiteBuilder {
  GradCheckReport report;
  double tol;
  std::string corrupt_op;

  void add(const std::string& op, Tensor& param, Tensor analytic,
           const std::function<double()>& loss) {
    maybe_corrupt(analytic, op, corrupt_op);
    const double err = fd_max_rel_error(param, analytic, loss);
    report.entries.push_back({op, err, err < tol});
  }
};

// Scalar probe: sum of out ⊙ probe makes every output element contribute.
double weighted_sum(const Tensor& out, const Tensor& probe) { return dot(out, probe); }

void check_primitives(SuiteBuilder& b) {
  Rng rng(20240601);

  // conv: C_in=2, C_out=2, T=5, K=3, dilation=2.
  {
    ConvParams p{random_tensor({2, 2, 3}, rng), random_tensor({2}, rng), 2};
    Tensor input = random_tensor({2, 5}, rng);
    Tensor probe = random_tensor({2, 5}, rng);
    auto loss = [&]() { return weighted_sum(dilated_causal_conv1d(input, p), probe); };
    ConvGrads g = dilated_causal_conv1d_backward(probe, input, p);
    b.add("conv1d.input", input, g.input, loss);
    b.add("conv1d.weight", p.weight, g.weight, loss);
    b.add("conv1d.bias", p.bias, g.bias, loss);
  }

  // linear: D_in=4, D_out=3.
  {
    LinearParams p{random_tensor({3, 4}, rng), random_tensor({3}, rng)};
    Tensor x = random_tensor({4}, rng);
    Tensor probe = random_tensor({3}, rng);
    auto loss = [&]() { return weighted_sum(linear_forward(x, p), probe); };
    LinearGrads g = linear_backward(probe, x, p);
    b.add("linear.input", x, g.input, loss);
    b.add("linear.weight", p.weight, g.weight, loss);
    b.add("linear.bias", p.bias, g.bias, loss);
  }

  // relu.
  {
    Tensor x = random_off_kink({8}, rng);
    Tensor probe = random_tensor({8}, rng);
    auto loss = [&]() { return weighted_sum(relu_forward(x), probe); };
    b.add("relu", x, relu_backward(probe, x), loss);
  }

  // elementwise mul.
  {
    Tensor x = random_tensor({6}, rng);
    Tensor y = random_tensor({6}, rng);
    Tensor probe = random_tensor({6}, rng);
    auto loss = [&]() { return weighted_sum(elementwise_mul_forward(x, y), probe); };
    auto [gx, gy] = elementwise_mul_backward(probe, x, y);
    b.add("elementwise_mul.lhs", x, gx, loss);
    b.add("elementwise_mul.rhs", y, gy, loss);
  }

  // mse loss gradient.
  {
    Tensor yhat = random_tensor({3, 2}, rng);
    Tensor y = random_tensor({3, 2}, rng);
    auto loss = [&]() { return mse_loss(yhat, y).first; };
    b.add("mse_loss", yhat, mse_loss(yhat, y).second, loss);
  }

  // chunked adapter: grad_dim=10, d=4 -> chunk 3 with a padded tail.
  {
    Rng arng(7);
    AdapterParams p = AdapterParams::init(10, 4, 3, arng);
    p.w2 = random_tensor({3}, rng);  // nonzero output map, else gradients vanish
    Tensor g_hat = random_tensor({10}, rng);
    Tensor probe = random_tensor({4}, rng);
    auto loss = [&]() { return weighted_sum(adapter_raw(g_hat, p), probe); };
    AdapterGrads g = adapter_backward(probe, g_hat, p);
    b.add("adapter.w1", p.w1, g.w1, loss);
    b.add("adapter.w2", p.w2, g.w2, loss);
  }
}

void check_network(SuiteBuilder& b) {
  TcnConfig cfg;
  cfg.num_blocks = 2;
  cfg.filters = 6;
  cfg.kernel_size = 3;
  cfg.input_dim = 2;
  cfg.lookback = 12;
  cfg.horizon = 3;

  Rng rng(998877);
  TcnState state = TcnState::init(cfg, rng);
  // Nonzero biases so their gradients are exercised away from the init.
  for (auto& blk : state.blocks) {
    for (int64_t i = 0; i < blk.conv1.bias.size(); ++i) blk.conv1.bias(i) = rng.uniform(-0.3, 0.3);
    for (int64_t i = 0; i < blk.conv2.bias.size(); ++i) blk.conv2.bias(i) = rng.uniform(-0.3, 0.3);
  }
  Tensor x = random_tensor({cfg.input_dim, cfg.lookback}, rng);
  Tensor y = random_tensor({cfg.horizon, cfg.input_dim}, rng);

  std::vector<AdaptationCoefficients> coeffs;
  for (int l = 0; l < cfg.num_blocks; ++l) {
    AdaptationCoefficients u{random_tensor({cfg.filters}, rng, 0.7, 1.3),
                             random_tensor({cfg.filters}, rng, 0.7, 1.3),
                             random_tensor({cfg.filters}, rng, 0.7, 1.3)};
    coeffs.push_back(std::move(u));
  }

  auto loss = [&]() {
    ForwardCache c = backbone_forward(x, state, &coeffs);
    return mse_loss(c.forecast, y).first;
  };

  ForwardCache cache = backbone_forward(x, state, &coeffs);
  auto [l0, grad_y] = mse_loss(cache.forecast, y);
  (void)l0;
  BackboneGrads g = backbone_backward(state, cache, grad_y);

  b.add("network.input_proj.weight", state.input_proj.weight, g.input_proj_w, loss);
  b.add("network.input_proj.bias", state.input_proj.bias, g.input_proj_b, loss);
  for (int l = 0; l < cfg.num_blocks; ++l) {
    const std::string p = "network.block" + std::to_string(l) + ".";
    b.add(p + "conv1.weight", state.blocks[l].conv1.weight, g.blocks[l].w1, loss);
    b.add(p + "conv1.bias", state.blocks[l].conv1.bias, g.blocks[l].b1, loss);
    b.add(p + "conv2.weight", state.blocks[l].conv2.weight, g.blocks[l].w2, loss);
    b.add(p + "conv2.bias", state.blocks[l].conv2.bias, g.blocks[l].b2, loss);
    b.add(p + "alpha_w", coeffs[l].alpha_w, g.blocks[l].alpha_w, loss);
    b.add(p + "alpha_b", coeffs[l].alpha_b, g.blocks[l].alpha_b, loss);
    b.add(p + "beta", coeffs[l].beta, g.blocks[l].beta, loss);
  }
  b.add("network.regressor.weight", state.regressor.weight, g.regressor_w, loss);
  b.add("network.regressor.bias", state.regressor.bias, g.regressor_b, loss);

  // Adapter-through-network chain: u_l = 1 + Omega(g_hat_l; phi_l).
  {
    Rng arng(5150);
    const int64_t d = coeff_dim_for_channels(cfg.filters);
    std::vector<AdapterParams> adapters;
    std::vector<Tensor> g_hats;
    for (int l = 0; l < cfg.num_blocks; ++l) {
      const int64_t gd = state.blocks[l].adapted_param_count();
      AdapterParams a = AdapterParams::init(gd, d, 4, arng);
      a.w2 = random_tensor({4}, arng, -0.5, 0.5);
      adapters.push_back(std::move(a));
      g_hats.push_back(random_tensor({gd}, arng, -0.5, 0.5));
    }
    auto chain_loss = [&]() {
      std::vector<AdaptationCoefficients> cs;
      for (int l = 0; l < cfg.num_blocks; ++l) {
        cs.push_back(AdaptationCoefficients::from_packed(adapter_forward(g_hats[l], adapters[l])));
      }
      ForwardCache c = backbone_forward(x, state, &cs);
      return mse_loss(c.forecast, y).first;
    };
    std::vector<AdaptationCoefficients> cs;
    for (int l = 0; l < cfg.num_blocks; ++l) {
      cs.push_back(AdaptationCoefficients::from_packed(adapter_forward(g_hats[l], adapters[l])));
    }
    ForwardCache c = backbone_forward(x, state, &cs);
    auto [lc, gy] = mse_loss(c.forecast, y);
    (void)lc;
    BackboneGrads gg = backbone_backward(state, c, gy);
    for (int l = 0; l < cfg.num_blocks; ++l) {
      Tensor grad_u({d});
      for (int64_t i = 0; i < cfg.filters; ++i) {
        grad_u(i) = gg.blocks[l].alpha_w(i);
        grad_u(cfg.filters + i) = gg.blocks[l].alpha_b(i);
        grad_u(2 * cfg.filters + i) = gg.blocks[l].beta(i);
      }
      AdapterGrads ag = adapter_backward(grad_u, g_hats[l], adapters[l]);
      const std::string p = "network.block" + std::to_string(l) + ".adapter.";
      b.add(p + "w1", adapters[l].w1, ag.w1, chain_loss);
      b.add(p + "w2", adapters[l].w2, ag.w2, chain_loss);
    }
  }
}

}  // namespace

GradCheckReport run_gradcheck_suite(double tolerance, const std::string& corrupt_op) {
  SuiteBuilder b;
  b.tol = tolerance;
  b.report.tolerance = tolerance;
  b.corrupt_op = corrupt_op;
  check_primitives(b);
  check_network(b);
  return b.report;
}

}  // namespace fsnet
