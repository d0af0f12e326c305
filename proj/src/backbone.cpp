#include "fsnet/backbone.hpp"

#include <cmath>

namespace fsnet {

void TcnConfig::validate() const {
  if (num_blocks < 1) throw std::invalid_argument("TcnConfig: num_blocks must be >= 1");
  if (filters < 1) throw std::invalid_argument("TcnConfig: filters must be >= 1");
  if (kernel_size < 1) throw std::invalid_argument("TcnConfig: kernel_size must be >= 1");
  if (input_dim < 1) throw std::invalid_argument("TcnConfig: input_dim must be >= 1");
  if (lookback < 1) throw std::invalid_argument("TcnConfig: lookback must be >= 1");
  if (horizon < 1) throw std::invalid_argument("TcnConfig: horizon must be >= 1");
}

AdaptationCoefficients AdaptationCoefficients::identity(int64_t c_out) {
  return {Tensor::full({c_out}, 1.0), Tensor::full({c_out}, 1.0), Tensor::full({c_out}, 1.0)};
}

AdaptationCoefficients AdaptationCoefficients::from_packed(const Tensor& u) {
  if (u.ndim() != 1 || u.dim(0) % 3 != 0) {
    throw ShapeError("AdaptationCoefficients: packed vector must have length 3*C_out, got " +
                     shape_str(u));
  }
  const int64_t c = u.dim(0) / 3;
  AdaptationCoefficients out{Tensor({c}), Tensor({c}), Tensor({c})};
  for (int64_t i = 0; i < c; ++i) {
    out.alpha_w(i) = u(i);
    out.alpha_b(i) = u(c + i);
    out.beta(i) = u(2 * c + i);
  }
  return out;
}

Tensor AdaptationCoefficients::packed() const {
  const int64_t c = channels();
  Tensor u({3 * c});
  for (int64_t i = 0; i < c; ++i) {
    u(i) = alpha_w(i);
    u(c + i) = alpha_b(i);
    u(2 * c + i) = beta(i);
  }
  return u;
}

namespace {

Tensor fan_in_uniform(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t(i) = rng.uniform(-bound, bound);
  return t;
}

ConvParams make_conv(int64_t c_out, int64_t c_in, int64_t k, int dilation, Rng& rng) {
  ConvParams p;
  p.weight = fan_in_uniform({c_out, c_in, k}, c_in * k, rng);
  p.bias = Tensor({c_out});
  p.dilation = dilation;
  return p;
}

}  // namespace

ConvParams adapt_conv_params(const ConvParams& p, const AdaptationCoefficients& u) {
  if (u.channels() != p.out_channels()) {
    throw ShapeError("adapt_conv_params: coefficient channels " + std::to_string(u.channels()) +
                     " do not match conv C_out=" + std::to_string(p.out_channels()));
  }
  ConvParams out;
  out.dilation = p.dilation;
  out.weight = Tensor(p.weight.shape());
  out.bias = Tensor(p.bias.shape());
  const int64_t per_channel = p.in_channels() * p.kernel();
  for (int64_t co = 0; co < p.out_channels(); ++co) {
    const double aw = u.alpha_w(co);
    const double* src = p.weight.data() + co * per_channel;
    double* dst = out.weight.data() + co * per_channel;
    for (int64_t i = 0; i < per_channel; ++i) dst[i] = aw * src[i];
    out.bias(co) = u.alpha_b(co) * p.bias(co);
  }
  return out;
}

Tensor scale_channels(const Tensor& h, const Tensor& beta) {
  if (h.ndim() != 2 || beta.ndim() != 1 || beta.dim(0) != h.dim(0)) {
    throw ShapeError("scale_channels: beta " + shape_str(beta) + " does not match feature map " +
                     shape_str(h));
  }
  Tensor out(h.shape());
  const int64_t t_len = h.dim(1);
  for (int64_t c = 0; c < h.dim(0); ++c) {
    const double b = beta(c);
    for (int64_t t = 0; t < t_len; ++t) out(c, t) = b * h(c, t);
  }
  return out;
}

std::pair<Tensor, ConvParams> adapt_layer(const ConvParams& theta, const Tensor& h_in,
                                          const AdaptationCoefficients& u) {
  ConvParams tilde = adapt_conv_params(theta, u);
  Tensor h = dilated_causal_conv1d(h_in, tilde);
  return {scale_channels(h, u.beta), std::move(tilde)};
}

TcnState TcnState::init(const TcnConfig& config, Rng& rng) {
  config.validate();
  TcnState s;
  s.config = config;
  const int64_t f = config.filters;
  s.input_proj = make_conv(f, config.input_dim, 1, 1, rng);
  s.blocks.reserve(config.num_blocks);
  for (int b = 0; b < config.num_blocks; ++b) {
    TcnBlock blk;
    blk.conv1 = make_conv(f, f, config.kernel_size, config.dilation_for(b), rng);
    blk.conv2 = make_conv(f, f, config.kernel_size, config.dilation_for(b), rng);
    s.blocks.push_back(std::move(blk));
  }
  const int64_t out = static_cast<int64_t>(config.horizon) * config.input_dim;
  s.regressor.weight = fan_in_uniform({out, f}, f, rng);
  s.regressor.bias = Tensor({out});
  return s;
}

int64_t TcnState::param_count() const {
  int64_t n = input_proj.param_count() + regressor.param_count();
  for (const auto& b : blocks) {
    n += b.conv1.param_count() + b.conv2.param_count();
    if (b.proj) n += b.proj->param_count();
  }
  return n;
}

ForwardCache backbone_forward(const Tensor& x, const TcnState& state,
                              const std::vector<AdaptationCoefficients>* adaptation) {
  const TcnConfig& cfg = state.config;
  if (x.ndim() != 2 || x.dim(0) != cfg.input_dim || x.dim(1) != cfg.lookback) {
    throw ShapeError("backbone_forward: input " + shape_str(x) + " does not match [n x E] = [" +
                     std::to_string(cfg.input_dim) + "x" + std::to_string(cfg.lookback) + "]");
  }
  if (adaptation && static_cast<int>(adaptation->size()) != cfg.num_blocks) {
    throw ShapeError("backbone_forward: adaptation pack count " +
                     std::to_string(adaptation->size()) + " does not match num_blocks=" +
                     std::to_string(cfg.num_blocks));
  }

  ForwardCache cache;
  cache.input = x;
  cache.version = state.version;
  cache.adapted = adaptation != nullptr;
  if (adaptation) cache.coeffs = *adaptation;

  cache.proj_out = dilated_causal_conv1d(x, state.input_proj);
  Tensor h = cache.proj_out;
  cache.blocks.reserve(state.blocks.size());
  for (size_t b = 0; b < state.blocks.size(); ++b) {
    const TcnBlock& blk = state.blocks[b];
    BlockCache bc;
    bc.in = h;

    const AdaptationCoefficients* u = adaptation ? &(*adaptation)[b] : nullptr;
    const ConvParams c1 = u ? adapt_conv_params(blk.conv1, *u) : blk.conv1;
    const ConvParams c2 = u ? adapt_conv_params(blk.conv2, *u) : blk.conv2;

    bc.a1 = dilated_causal_conv1d(bc.in, c1);
    bc.f1 = u ? scale_channels(bc.a1, u->beta) : bc.a1;
    bc.r1 = relu_forward(bc.f1);
    bc.a2 = dilated_causal_conv1d(bc.r1, c2);
    Tensor f2 = u ? scale_channels(bc.a2, u->beta) : bc.a2;

    Tensor skip = blk.proj ? dilated_causal_conv1d(bc.in, *blk.proj) : bc.in;
    bc.out = add(f2, skip);
    require_finite(bc.out, "backbone block");
    h = bc.out;
    cache.blocks.push_back(std::move(bc));
  }

  const int64_t f = cfg.filters;
  const int64_t last = cfg.lookback - 1;
  cache.h_last = Tensor({f});
  for (int64_t c = 0; c < f; ++c) cache.h_last(c) = h(c, last);

  Tensor flat = linear_forward(cache.h_last, state.regressor);
  cache.forecast = flat.reshaped({cfg.horizon, cfg.input_dim});
  return cache;
}

BackboneGrads backbone_backward(const TcnState& state, const ForwardCache& cache,
                                const Tensor& grad_forecast) {
  if (cache.version != state.version) {
    throw std::logic_error("backbone_backward: stale cache (parameters changed since forward)");
  }
  const TcnConfig& cfg = state.config;
  require_same_shape(grad_forecast, cache.forecast, "backbone_backward");

  BackboneGrads g;
  g.blocks.resize(state.blocks.size());

  // Regressor.
  Tensor grad_flat = grad_forecast.flattened();
  LinearGrads lg = linear_backward(grad_flat, cache.h_last, state.regressor);
  g.regressor_w = std::move(lg.weight);
  g.regressor_b = std::move(lg.bias);

  // Gradient arrives at the last time step of the final feature map; the
  // live span then widens by (K-1)*dilation per conv on the way down.
  const int64_t f = cfg.filters;
  const int64_t t_len = cfg.lookback;
  Tensor grad_h({f, t_len});
  for (int64_t c = 0; c < f; ++c) grad_h(c, t_len - 1) = lg.input(c);
  int64_t active = t_len - 1;

  for (int64_t b = static_cast<int64_t>(state.blocks.size()) - 1; b >= 0; --b) {
    const TcnBlock& blk = state.blocks[b];
    const BlockCache& bc = cache.blocks[b];
    const AdaptationCoefficients* u = cache.adapted ? &cache.coeffs[b] : nullptr;
    BlockGrads& bg = g.blocks[b];
    const int64_t reach = static_cast<int64_t>(cfg.kernel_size - 1) * blk.conv1.dilation;

    const ConvParams c1 = u ? adapt_conv_params(blk.conv1, *u) : blk.conv1;
    const ConvParams c2 = u ? adapt_conv_params(blk.conv2, *u) : blk.conv2;

    if (u) {
      bg.alpha_w = Tensor({f});
      bg.alpha_b = Tensor({f});
      bg.beta = Tensor({f});
    }

    // out = f2 + skip, f2 = beta ⊙ a2.
    Tensor grad_f2 = grad_h;  // also the skip gradient
    Tensor grad_a2 = u ? scale_channels(grad_f2, u->beta) : grad_f2;
    if (u) {
      for (int64_t c = 0; c < f; ++c) {
        double acc = 0.0;
        for (int64_t t = active; t < t_len; ++t) acc += grad_f2(c, t) * bc.a2(c, t);
        bg.beta(c) += acc;
      }
    }

    ConvGrads cg2 = dilated_causal_conv1d_backward(grad_a2, bc.r1, c2, active);
    const int64_t active_r1 = std::max<int64_t>(0, active - reach);
    Tensor grad_f1 = relu_backward(cg2.input, bc.f1);
    Tensor grad_a1 = u ? scale_channels(grad_f1, u->beta) : grad_f1;
    if (u) {
      for (int64_t c = 0; c < f; ++c) {
        double acc = 0.0;
        for (int64_t t = active_r1; t < t_len; ++t) acc += grad_f1(c, t) * bc.a1(c, t);
        bg.beta(c) += acc;
      }
    }
    ConvGrads cg1 = dilated_causal_conv1d_backward(grad_a1, bc.in, c1, active_r1);

    // Chain rule back to the unadapted parameters: d/d theta = alpha ⊙ d/d theta~,
    // and the alpha gradients pick up theta ⊙ d/d theta~. Without adaptation
    // the adapted gradients already are the raw ones.
    auto unadapt = [&](ConvGrads& cg, const ConvParams& raw, Tensor& gw, Tensor& gb) {
      if (!u) {
        gw = std::move(cg.weight);
        gb = std::move(cg.bias);
        return;
      }
      gw = Tensor(raw.weight.shape());
      gb = Tensor(raw.bias.shape());
      const int64_t per_channel = raw.in_channels() * raw.kernel();
      const double* all_src = cg.weight.data();
      const double* all_raw = raw.weight.data();
      double* all_dst = gw.data();
      for (int64_t co = 0; co < f; ++co) {
        const double aw = u->alpha_w(co);
        const double* src = all_src + co * per_channel;
        const double* wraw = all_raw + co * per_channel;
        double* dst = all_dst + co * per_channel;
        double a_acc = 0.0;
        for (int64_t i = 0; i < per_channel; ++i) {
          dst[i] = aw * src[i];
          a_acc += src[i] * wraw[i];
        }
        gb(co) = u->alpha_b(co) * cg.bias(co);
        bg.alpha_w(co) += a_acc;
        bg.alpha_b(co) += cg.bias(co) * raw.bias(co);
      }
    };
    unadapt(cg2, blk.conv2, bg.w2, bg.b2);
    unadapt(cg1, blk.conv1, bg.w1, bg.b1);

    Tensor grad_in = cg1.input;
    if (blk.proj) {
      ConvGrads pg = dilated_causal_conv1d_backward(grad_f2, bc.in, *blk.proj, active);
      axpy(grad_in, 1.0, pg.input);
    } else {
      axpy(grad_in, 1.0, grad_f2);
    }
    grad_h = std::move(grad_in);
    active = std::max<int64_t>(0, active_r1 - reach);
  }

  ConvGrads pg = dilated_causal_conv1d_backward(grad_h, cache.input, state.input_proj, active);
  g.input_proj_w = std::move(pg.weight);
  g.input_proj_b = std::move(pg.bias);
  return g;
}

std::pair<double, Tensor> mse_loss(const Tensor& yhat, const Tensor& y) {
  require_same_shape(yhat, y, "mse_loss");
  const double h = static_cast<double>(yhat.dim(0));
  double loss = 0.0;
  Tensor grad(yhat.shape());
  for (int64_t i = 0; i < yhat.size(); ++i) {
    const double d = yhat(i) - y(i);
    loss += d * d;
    grad(i) = 2.0 * d / h;
  }
  return {loss / h, grad};
}

double mse_metric(const Tensor& yhat, const Tensor& y) {
  require_same_shape(yhat, y, "mse_metric");
  double s = 0.0;
  for (int64_t i = 0; i < yhat.size(); ++i) {
    const double d = yhat(i) - y(i);
    s += d * d;
  }
  return s / static_cast<double>(yhat.size());
}

double mae_metric(const Tensor& yhat, const Tensor& y) {
  require_same_shape(yhat, y, "mae_metric");
  double s = 0.0;
  for (int64_t i = 0; i < yhat.size(); ++i) s += std::abs(yhat(i) - y(i));
  return s / static_cast<double>(yhat.size());
}

}  // namespace fsnet
