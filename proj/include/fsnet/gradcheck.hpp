#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fsnet/tensor.hpp"

namespace fsnet {

struct GradCheckEntry {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 1e-5;
  bool all_pass() const;
  const GradCheckEntry* worst() const;
};

// Central finite differences (step h) of a scalar function over every entry
// of `param`, compared against `analytic`. The error is relative with a unit
// floor: |fd - an| / max(1, |fd|, |an|).
double fd_max_rel_error(Tensor& param, const Tensor& analytic,
                        const std::function<double()>& loss, double h = 1e-5);

// Every primitive plus a 2-block end-to-end network, fixed seeds. A non-empty
// `corrupt_op` perturbs that op's analytic gradient, for verifying that the
// harness actually catches broken backward passes.
GradCheckReport run_gradcheck_suite(double tolerance = 1e-5, const std::string& corrupt_op = "");

}  // namespace fsnet
