#include "fsnet/optimizer.hpp"

#include <cmath>

namespace fsnet {

void AdamW::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("AdamW::step: params/grads count mismatch");
  }
  if (slots_.empty()) {
    slots_.reserve(params.size());
    for (const Tensor* p : params) slots_.push_back({Tensor(p->shape()), Tensor(p->shape())});
  }
  if (slots_.size() != params.size()) {
    throw std::invalid_argument("AdamW::step: parameter count changed between steps");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - opt_.lr * opt_.weight_decay;

  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    require_same_shape(p, g, "AdamW::step");
    Slot& s = slots_[i];
    require_same_shape(p, s.m, "AdamW::step (state)");
    for (int64_t j = 0; j < p.size(); ++j) {
      const double gj = g(j);
      s.m(j) = opt_.beta1 * s.m(j) + (1.0 - opt_.beta1) * gj;
      s.v(j) = opt_.beta2 * s.v(j) + (1.0 - opt_.beta2) * gj * gj;
      const double m_hat = s.m(j) / bc1;
      const double v_hat = s.v(j) / bc2;
      p(j) = decay * p(j) - opt_.lr * m_hat / (std::sqrt(v_hat) + opt_.eps);
    }
  }
}

int64_t AdamW::state_count() const {
  int64_t n = 0;
  for (const Slot& s : slots_) n += s.m.size() + s.v.size();
  return n;
}

}  // namespace fsnet
