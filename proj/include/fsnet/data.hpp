#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsnet/tensor.hpp"

namespace fsnet {

// A [T x n] multivariate series, row-major, with optional column names.
struct Series {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> values;  // rows * cols
  std::vector<std::string> column_names;

  double at(int64_t t, int64_t c) const { return values[static_cast<size_t>(t * cols + c)]; }
  double& at(int64_t t, int64_t c) { return values[static_cast<size_t>(t * cols + c)]; }
  static Series univariate(std::vector<double> v, std::string name = "x");
};

// First-order autoregressive chain X_t = phi*X_{t-1} + eps_t, eps ~ N(0, sigma^2),
// initialized from the stationary distribution N(0, sigma^2/(1-phi^2)).
std::vector<double> gen_ar1(double phi, int64_t length, uint64_t seed, double sigma = 1.0);

// 6000 points: six fresh AR(1) segments of 1000 points each with
// phi = 0.1, 0.4, 0.6, 0.1, 0.4, 0.6.
Series gen_s_abrupt(uint64_t seed);
inline const std::vector<int64_t>& s_abrupt_boundaries() {
  static const std::vector<int64_t> b{1000, 2000, 3000, 4000, 5000};
  return b;
}

// 5000 points over three independently evolving AR chains (phi 0.1/0.4/0.6);
// pure regions output one chain, transition regions the average of two.
Series gen_s_gradual(uint64_t seed);
inline const std::vector<int64_t>& s_gradual_boundaries() {
  static const std::vector<int64_t> b{800, 1000, 1600, 1800, 2400, 2600, 3200, 3400, 4000, 4200};
  return b;
}

// CSV with a header row. feature_columns empty selects every column.
Series load_csv(const std::string& path, const std::vector<std::string>& feature_columns = {});
void write_csv(const std::string& path, const Series& series);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8
};

Series normalize(const Series& s, const NormStats& stats);
Series denormalize(const Series& s, const NormStats& stats);

struct SplitResult {
  Series warmup;
  Series online;
  NormStats stats;  // computed from the warm-up portion only
};
SplitResult split_and_normalize(const Series& series, double warmup_ratio = 0.25);

struct StreamSample {
  Tensor lookback;  // [n x E]
  Tensor target;    // [H x n]
  int64_t index = 0;
};

int64_t window_count(int64_t series_len, int lookback, int horizon);
StreamSample window_at(const Series& series, int64_t i, int lookback, int horizon);

// Stride-1 sliding-window pass over a series, strictly ordered by start index.
class WindowIterator {
 public:
  WindowIterator(const Series& series, int lookback, int horizon);
  bool has_next() const { return next_ < count_; }
  StreamSample next();
  int64_t count() const { return count_; }

 private:
  const Series& series_;
  int lookback_;
  int horizon_;
  int64_t next_ = 0;
  int64_t count_ = 0;
};

std::vector<StreamSample> all_windows(const Series& series, int lookback, int horizon);

}  // namespace fsnet
