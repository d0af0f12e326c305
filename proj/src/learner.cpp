#include "fsnet/learner.hpp"

#include <cmath>

namespace fsnet {

std::vector<std::pair<std::string, Tensor>> named_backbone_tensors(const TcnState& state) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("input_proj.weight", state.input_proj.weight);
  out.emplace_back("input_proj.bias", state.input_proj.bias);
  for (size_t b = 0; b < state.blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    out.emplace_back(p + "conv1.weight", state.blocks[b].conv1.weight);
    out.emplace_back(p + "conv1.bias", state.blocks[b].conv1.bias);
    out.emplace_back(p + "conv2.weight", state.blocks[b].conv2.weight);
    out.emplace_back(p + "conv2.bias", state.blocks[b].conv2.bias);
    if (state.blocks[b].proj) {
      out.emplace_back(p + "proj.weight", state.blocks[b].proj->weight);
      out.emplace_back(p + "proj.bias", state.blocks[b].proj->bias);
    }
  }
  out.emplace_back("regressor.weight", state.regressor.weight);
  out.emplace_back("regressor.bias", state.regressor.bias);
  return out;
}

namespace {

// Stable optimizer ordering for the backbone portion; learners append their
// extra parameters after this prefix.
void collect_backbone(TcnState& state, BackboneGrads& g, std::vector<Tensor*>& params,
                      std::vector<const Tensor*>& grads) {
  params.push_back(&state.input_proj.weight);
  grads.push_back(&g.input_proj_w);
  params.push_back(&state.input_proj.bias);
  grads.push_back(&g.input_proj_b);
  for (size_t b = 0; b < state.blocks.size(); ++b) {
    params.push_back(&state.blocks[b].conv1.weight);
    grads.push_back(&g.blocks[b].w1);
    params.push_back(&state.blocks[b].conv1.bias);
    grads.push_back(&g.blocks[b].b1);
    params.push_back(&state.blocks[b].conv2.weight);
    grads.push_back(&g.blocks[b].w2);
    params.push_back(&state.blocks[b].conv2.bias);
    grads.push_back(&g.blocks[b].b2);
  }
  params.push_back(&state.regressor.weight);
  grads.push_back(&g.regressor_w);
  params.push_back(&state.regressor.bias);
  grads.push_back(&g.regressor_b);
}

std::string layer_norm_dump(const TcnState& state) {
  std::string s;
  for (size_t b = 0; b < state.blocks.size(); ++b) {
    s += " block" + std::to_string(b) + " |w1|=" + std::to_string(l2_norm(state.blocks[b].conv1.weight)) +
         " |w2|=" + std::to_string(l2_norm(state.blocks[b].conv2.weight));
  }
  return s;
}

void check_loss_finite(double loss, const TcnState& state, const char* who) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(who) + ": non-finite loss; layer norms:" +
                          layer_norm_dump(state));
  }
}

void accumulate_grads(BackboneGrads& acc, const BackboneGrads& g, double scale_by) {
  axpy(acc.input_proj_w, scale_by, g.input_proj_w);
  axpy(acc.input_proj_b, scale_by, g.input_proj_b);
  for (size_t b = 0; b < acc.blocks.size(); ++b) {
    axpy(acc.blocks[b].w1, scale_by, g.blocks[b].w1);
    axpy(acc.blocks[b].b1, scale_by, g.blocks[b].b1);
    axpy(acc.blocks[b].w2, scale_by, g.blocks[b].w2);
    axpy(acc.blocks[b].b2, scale_by, g.blocks[b].b2);
  }
  axpy(acc.regressor_w, scale_by, g.regressor_w);
  axpy(acc.regressor_b, scale_by, g.regressor_b);
}

}  // namespace

OnlineTcnLearner::OnlineTcnLearner(const TcnConfig& config, uint64_t seed, AdamWOptions opt)
    : opt_(opt) {
  Rng rng(derive_seed(seed, "model"));
  state_ = TcnState::init(config, rng);
}

StepReport OnlineTcnLearner::step(const StreamSample& sample) {
  ForwardCache cache = backbone_forward(sample.lookback, state_);
  auto [loss, grad_y] = mse_loss(cache.forecast, sample.target);
  check_loss_finite(loss, state_, "onlinetcn");
  BackboneGrads g = backbone_backward(state_, cache, grad_y);

  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  collect_backbone(state_, g, params, grads);
  opt_.step(params, grads);
  state_.bump();

  StepReport rep;
  rep.forecast = std::move(cache.forecast);
  rep.loss = loss;
  rep.layers.resize(static_cast<size_t>(state_.config.num_blocks));
  return rep;
}

Checkpoint OnlineTcnLearner::snapshot() const {
  return {1, name(), state_.config, named_backbone_tensors(state_)};
}

ParamCounts OnlineTcnLearner::param_counts() const {
  ParamCounts c;
  c.backbone = state_.param_count();
  return c;
}

ReservoirBuffer::ReservoirBuffer(int capacity, uint64_t seed)
    : capacity_(capacity), rng_(derive_seed(seed, "reservoir")) {
  if (capacity < 1) throw std::invalid_argument("ReservoirBuffer: capacity must be >= 1");
  items_.reserve(static_cast<size_t>(capacity));
}

void ReservoirBuffer::insert(StreamSample sample) {
  ++seen_;
  if (items_.size() < static_cast<size_t>(capacity_)) {
    items_.push_back(std::move(sample));
    return;
  }
  const uint64_t j = rng_.below(seen_);
  if (j < static_cast<uint64_t>(capacity_)) items_[static_cast<size_t>(j)] = std::move(sample);
}

std::vector<const StreamSample*> ReservoirBuffer::sample_batch(int k, Rng& rng) const {
  const size_t want = std::min(static_cast<size_t>(k), items_.size());
  std::vector<size_t> idx(items_.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<const StreamSample*> out;
  out.reserve(want);
  for (size_t i = 0; i < want; ++i) {
    const size_t pick = i + static_cast<size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[pick]);
    out.push_back(&items_[idx[i]]);
  }
  return out;
}

ErLearner::ErLearner(const TcnConfig& config, uint64_t seed, AdamWOptions opt, ErOptions er)
    : opt_(opt),
      er_(er),
      buffer_(er.buffer_capacity, seed),
      replay_rng_(derive_seed(seed, "replay")) {
  Rng rng(derive_seed(seed, "model"));
  state_ = TcnState::init(config, rng);
}

StepReport ErLearner::step(const StreamSample& sample) {
  ForwardCache cache = backbone_forward(sample.lookback, state_);
  auto [loss, grad_y] = mse_loss(cache.forecast, sample.target);
  check_loss_finite(loss, state_, "er");
  BackboneGrads g = backbone_backward(state_, cache, grad_y);
  double combined = loss;

  if (er_.lambda != 0.0 && !buffer_.empty()) {
    for (const StreamSample* r : buffer_.sample_batch(er_.replay_batch, replay_rng_)) {
      ForwardCache c = backbone_forward(r->lookback, state_);
      auto [l, gy] = mse_loss(c.forecast, r->target);
      accumulate_grads(g, backbone_backward(state_, c, gy), er_.lambda);
      combined += er_.lambda * l;
    }
    check_loss_finite(combined, state_, "er (replay)");
  }

  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  collect_backbone(state_, g, params, grads);
  opt_.step(params, grads);
  state_.bump();
  buffer_.insert(sample);

  StepReport rep;
  rep.forecast = std::move(cache.forecast);
  rep.loss = combined;
  rep.layers.resize(static_cast<size_t>(state_.config.num_blocks));
  return rep;
}

Checkpoint ErLearner::snapshot() const {
  return {1, name(), state_.config, named_backbone_tensors(state_)};
}

ParamCounts ErLearner::param_counts() const {
  ParamCounts c;
  c.backbone = state_.param_count();
  const auto& cfg = state_.config;
  c.episodic_buffer = static_cast<int64_t>(er_.buffer_capacity) *
                      (static_cast<int64_t>(cfg.lookback) + cfg.horizon) * cfg.input_dim;
  return c;
}

}  // namespace fsnet
