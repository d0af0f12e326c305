#pragma once

#include <cstdint>
#include <vector>

#include "fsnet/tensor.hpp"

namespace fsnet {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam. Moment slots are allocated on the first step
// and bound to the parameter order, which callers must keep stable.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : opt_(options) {}

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  int64_t steps() const { return t_; }
  const AdamWOptions& options() const { return opt_; }
  int64_t state_count() const;  // moment floats held, for the parameter report

 private:
  struct Slot {
    Tensor m;
    Tensor v;
  };
  AdamWOptions opt_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

}  // namespace fsnet
