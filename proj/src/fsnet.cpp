#include "fsnet/fsnet.hpp"

#include <cmath>

namespace fsnet {

std::string variant_name(FsnetVariant v) {
  switch (v) {
    case FsnetVariant::Full: return "fsnet";
    case FsnetVariant::NoMemory: return "fsnet-nomem";
    case FsnetVariant::Naive: return "fsnet-naive";
    case FsnetVariant::LargeMemory: return "fsnet-large";
  }
  return "fsnet";
}

FsnetLearner::FsnetLearner(const TcnConfig& config, uint64_t seed, FsnetVariant variant,
                           FsnetHyperparams hp, AdamWOptions opt)
    : variant_(variant), hp_(hp), opt_(opt) {
  if (variant_ == FsnetVariant::LargeMemory) hp_.mem_items = 128;
  hp_.validate();
  AdamWOptions a = opt;
  a.weight_decay = hp_.adapter_weight_decay;
  adapter_opt_ = AdamW(a);
  // Backbone draws come from the same stream as the baselines so that equal
  // seeds mean equal initial forecasters across learner kinds.
  Rng model_rng(derive_seed(seed, "model"));
  state_ = TcnState::init(config, model_rng);

  const int64_t d = coeff_dim_for_channels(config.filters);
  if (variant_ == FsnetVariant::Naive) {
    naive_u_.reserve(state_.blocks.size());
    for (size_t b = 0; b < state_.blocks.size(); ++b) naive_u_.push_back(Tensor::full({d}, 1.0));
    return;
  }

  Rng adapter_rng(derive_seed(seed, "adapter"));
  adapters_.reserve(state_.blocks.size());
  fast_.reserve(state_.blocks.size());
  for (const TcnBlock& blk : state_.blocks) {
    const int64_t grad_dim = blk.adapted_param_count();
    adapters_.push_back(AdapterParams::init(grad_dim, d, hp_.adapter_hidden, adapter_rng));
    LayerFastState fs;
    fs.g_hat = Tensor({grad_dim});
    fs.g_hat_prime = Tensor({grad_dim});
    fs.u_hat = Tensor({d});
    fs.memory = Tensor({hp_.mem_items, d});
    fast_.push_back(std::move(fs));
  }
}

void FsnetLearner::force_identity_adapters() {
  for (AdapterParams& a : adapters_) a.w2 = Tensor(a.w2.shape());
}

Tensor FsnetLearner::flatten_block_grads(const BlockGrads& g) const {
  Tensor out({g.w1.size() + g.b1.size() + g.w2.size() + g.b2.size()});
  int64_t at = 0;
  for (const Tensor* t : {&g.w1, &g.b1, &g.w2, &g.b2}) {
    for (int64_t i = 0; i < t->size(); ++i) out(at++) = (*t)(i);
  }
  return out;
}

StepReport FsnetLearner::step(const StreamSample& sample) {
  const int blocks = state_.config.num_blocks;
  StepReport rep;
  rep.layers.resize(static_cast<size_t>(blocks));

  // (a) Adaptation coefficients, with the sparse memory interaction on
  // blocks whose trigger flag was armed at the end of the previous step.
  std::vector<AdaptationCoefficients> coeffs(static_cast<size_t>(blocks));
  std::vector<Tensor> u_raw(static_cast<size_t>(blocks));
  std::vector<double> blend_scale(static_cast<size_t>(blocks), 1.0);
  for (int l = 0; l < blocks; ++l) {
    const size_t li = static_cast<size_t>(l);
    if (variant_ == FsnetVariant::Naive) {
      coeffs[li] = AdaptationCoefficients::from_packed(naive_u_[li]);
      continue;
    }
    LayerFastState& fs = fast_[li];
    Tensor raw = adapter_raw(fs.g_hat, adapters_[li]);
    if (uses_memory() && fs.trigger) {
      MemoryReadResult read = memory_read(fs.memory, fs.u_hat, hp_.top_k, fs.memory_written);
      // The write reuses the read's attention; on a cold store the softmax
      // over zero rows spreads the first item uniformly over the top rows.
      SparseAttention write_att = memory_attention(fs.memory, fs.u_hat, hp_.top_k);
      fs.memory = memory_write(fs.memory, fs.u_hat, write_att, hp_.tau);
      fs.memory_written = true;
      raw = add(scale(raw, hp_.tau), scale(read.u_tilde, 1.0 - hp_.tau));
      blend_scale[li] = hp_.tau;
      fs.trigger = false;
      rep.layers[li].read_performed = true;
      rep.layers[li].attention = read.attention;
    }
    u_raw[li] = raw;
    Tensor used = raw;
    for (int64_t i = 0; i < used.size(); ++i) used(i) += 1.0;
    coeffs[li] = AdaptationCoefficients::from_packed(used);
  }

  // (b) Adapted forward, forecast, loss.
  ForwardCache cache = backbone_forward(sample.lookback, state_, &coeffs);
  auto [loss, grad_y] = mse_loss(cache.forecast, sample.target);
  if (!std::isfinite(loss)) {
    std::string dump;
    for (int l = 0; l < blocks; ++l) {
      dump += " block" + std::to_string(l) +
              " |w1|=" + std::to_string(l2_norm(state_.blocks[static_cast<size_t>(l)].conv1.weight)) +
              " |u|=" + std::to_string(l2_norm(coeffs[static_cast<size_t>(l)].packed()));
    }
    throw DivergenceError(name() + ": non-finite loss; layer norms:" + dump);
  }

  // (c) Backward and one optimizer transition over theta, phi and R.
  BackboneGrads g = backbone_backward(state_, cache, grad_y);

  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  params.push_back(&state_.input_proj.weight);
  grads.push_back(&g.input_proj_w);
  params.push_back(&state_.input_proj.bias);
  grads.push_back(&g.input_proj_b);
  for (int l = 0; l < blocks; ++l) {
    const size_t li = static_cast<size_t>(l);
    params.push_back(&state_.blocks[li].conv1.weight);
    grads.push_back(&g.blocks[li].w1);
    params.push_back(&state_.blocks[li].conv1.bias);
    grads.push_back(&g.blocks[li].b1);
    params.push_back(&state_.blocks[li].conv2.weight);
    grads.push_back(&g.blocks[li].w2);
    params.push_back(&state_.blocks[li].conv2.bias);
    grads.push_back(&g.blocks[li].b2);
  }
  params.push_back(&state_.regressor.weight);
  grads.push_back(&g.regressor_w);
  params.push_back(&state_.regressor.bias);
  grads.push_back(&g.regressor_b);

  std::vector<Tensor> grad_u(static_cast<size_t>(blocks));
  std::vector<AdapterGrads> adapter_grads(static_cast<size_t>(blocks));
  std::vector<Tensor*> adapter_params;
  std::vector<const Tensor*> adapter_grad_ptrs;
  for (int l = 0; l < blocks; ++l) {
    const size_t li = static_cast<size_t>(l);
    Tensor gu({coeff_dim_for_channels(state_.config.filters)});
    const int64_t c = state_.config.filters;
    for (int64_t i = 0; i < c; ++i) {
      gu(i) = g.blocks[li].alpha_w(i);
      gu(c + i) = g.blocks[li].alpha_b(i);
      gu(2 * c + i) = g.blocks[li].beta(i);
    }
    if (variant_ == FsnetVariant::Naive) {
      grad_u[li] = std::move(gu);
      params.push_back(&naive_u_[li]);
      grads.push_back(&grad_u[li]);
    } else {
      // The memory blend keeps only tau of the adapter's own output, so the
      // coefficient gradient reaching phi carries the same factor.
      adapter_grads[li] =
          adapter_backward(scale(gu, blend_scale[li]), fast_[li].g_hat, adapters_[li]);
      adapter_params.push_back(&adapters_[li].w1);
      adapter_grad_ptrs.push_back(&adapter_grads[li].w1);
      adapter_params.push_back(&adapters_[li].w2);
      adapter_grad_ptrs.push_back(&adapter_grads[li].w2);
    }
  }
  opt_.step(params, grads);
  if (!adapter_params.empty()) adapter_opt_.step(adapter_params, adapter_grad_ptrs);
  state_.bump();

  // (d) + (e) EMA refresh and the trigger condition for the next step.
  if (uses_adapter()) {
    for (int l = 0; l < blocks; ++l) {
      const size_t li = static_cast<size_t>(l);
      LayerFastState& fs = fast_[li];
      Tensor g_flat = flatten_block_grads(g.blocks[li]);
      if (hp_.grad_clip > 0.0) {
        const double norm = l2_norm(g_flat);
        if (norm > hp_.grad_clip) {
          for (int64_t i = 0; i < g_flat.size(); ++i) g_flat(i) *= hp_.grad_clip / norm;
        }
      }
      fs.g_hat = ema_update(fs.g_hat, g_flat, hp_.gamma);
      fs.g_hat_prime = ema_update(fs.g_hat_prime, g_flat, hp_.gamma_prime);
      fs.u_hat = ema_update(fs.u_hat, u_raw[li], hp_.gamma_prime);
      fs.last_cosine = gradient_cosine(fs.g_hat, fs.g_hat_prime);
      fs.trigger = uses_memory() && fs.last_cosine < -hp_.tau;
      rep.layers[li].cosine = fs.last_cosine;
      rep.layers[li].triggered = fs.trigger;
    }
  }

  rep.forecast = std::move(cache.forecast);
  rep.loss = loss;
  return rep;
}

Checkpoint FsnetLearner::snapshot() const {
  Checkpoint ck{1, name(), state_.config, named_backbone_tensors(state_)};
  for (size_t b = 0; b < adapters_.size(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".adapter.";
    ck.tensors.emplace_back(p + "w1", adapters_[b].w1);
    ck.tensors.emplace_back(p + "w2", adapters_[b].w2);
  }
  for (size_t b = 0; b < naive_u_.size(); ++b) {
    ck.tensors.emplace_back("block" + std::to_string(b) + ".coeffs", naive_u_[b]);
  }
  return ck;
}

ParamCounts FsnetLearner::param_counts() const {
  ParamCounts c;
  c.backbone = state_.param_count();
  for (const AdapterParams& a : adapters_) c.adapter += a.param_count();
  for (const Tensor& u : naive_u_) c.adapter += u.size();
  for (const LayerFastState& fs : fast_) {
    c.g_ema += fs.g_hat.size() + fs.g_hat_prime.size() + fs.u_hat.size();
    if (uses_memory()) c.assoc_memory += fs.memory.size();
  }
  return c;
}

std::unique_ptr<FsnetLearner> make_variant(FsnetVariant kind, const TcnConfig& config,
                                           uint64_t seed, FsnetHyperparams hp, AdamWOptions opt) {
  return std::make_unique<FsnetLearner>(config, seed, kind, hp, opt);
}

}  // namespace fsnet
