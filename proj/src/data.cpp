#include "fsnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fsnet/rng.hpp"

namespace fsnet {

Series Series::univariate(std::vector<double> v, std::string name) {
  Series s;
  s.rows = static_cast<int64_t>(v.size());
  s.cols = 1;
  s.values = std::move(v);
  s.column_names = {std::move(name)};
  return s;
}

std::vector<double> gen_ar1(double phi, int64_t length, uint64_t seed, double sigma) {
  if (std::abs(phi) >= 1.0) {
    throw std::invalid_argument("gen_ar1: coefficient must satisfy |phi| < 1");
  }
  if (sigma <= 0.0) throw std::invalid_argument("gen_ar1: sigma must be > 0");
  if (length < 1) throw std::invalid_argument("gen_ar1: length must be >= 1");
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(length));
  const double stationary_sd = sigma / std::sqrt(1.0 - phi * phi);
  x[0] = rng.normal(0.0, stationary_sd);
  for (int64_t t = 1; t < length; ++t) {
    x[static_cast<size_t>(t)] = phi * x[static_cast<size_t>(t - 1)] + rng.normal(0.0, sigma);
  }
  return x;
}

Series gen_s_abrupt(uint64_t seed) {
  static const double phis[] = {0.1, 0.4, 0.6, 0.1, 0.4, 0.6};
  std::vector<double> out;
  out.reserve(6000);
  for (int seg = 0; seg < 6; ++seg) {
    auto run = gen_ar1(phis[seg], 1000, derive_seed(seed, "s-abrupt-" + std::to_string(seg)));
    out.insert(out.end(), run.begin(), run.end());
  }
  return Series::univariate(std::move(out));
}

Series gen_s_gradual(uint64_t seed) {
  // Three chains evolve continuously across the whole series so that pure
  // regions connect smoothly with their neighbouring blends.
  const auto a = gen_ar1(0.1, 5000, derive_seed(seed, "s-gradual-a"));
  const auto b = gen_ar1(0.4, 5000, derive_seed(seed, "s-gradual-b"));
  const auto c = gen_ar1(0.6, 5000, derive_seed(seed, "s-gradual-c"));

  struct Region {
    int64_t end;
    const std::vector<double>* first;
    const std::vector<double>* second;  // null for a pure region
  };
  const Region regions[] = {
      {800, &a, nullptr},  {1000, &a, &b}, {1600, &b, nullptr}, {1800, &b, &c},
      {2400, &c, nullptr}, {2600, &c, &a}, {3200, &a, nullptr}, {3400, &a, &b},
      {4000, &b, nullptr}, {4200, &b, &c}, {5000, &c, nullptr},
  };

  std::vector<double> out(5000);
  int64_t t = 0;
  for (const Region& r : regions) {
    for (; t < r.end; ++t) {
      const size_t i = static_cast<size_t>(t);
      out[i] = r.second ? 0.5 * ((*r.first)[i] + (*r.second)[i]) : (*r.first)[i];
    }
  }
  return Series::univariate(std::move(out));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Series load_csv(const std::string& path, const std::vector<std::string>& feature_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);

  const auto header = split_csv_line(line);
  std::vector<std::string> names;
  std::vector<size_t> selected;
  if (feature_columns.empty()) {
    for (size_t i = 0; i < header.size(); ++i) {
      names.push_back(trim(header[i]));
      selected.push_back(i);
    }
  } else {
    for (const std::string& want : feature_columns) {
      auto it = std::find_if(header.begin(), header.end(),
                             [&](const std::string& h) { return trim(h) == want; });
      if (it == header.end()) {
        throw std::runtime_error("load_csv: column \"" + want + "\" not found in " + path);
      }
      names.push_back(want);
      selected.push_back(static_cast<size_t>(it - header.begin()));
    }
  }

  Series s;
  s.cols = static_cast<int64_t>(selected.size());
  s.column_names = names;
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    for (size_t j = 0; j < selected.size(); ++j) {
      if (selected[j] >= cells.size()) {
        throw std::runtime_error("load_csv: row " + std::to_string(line_no) + " is missing column \"" +
                                 names[j] + "\"");
      }
      const std::string cell = trim(cells[selected[j]]);
      try {
        size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        s.values.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                                 ", column \"" + names[j] + "\": non-numeric value \"" + cell + "\"");
      }
    }
    ++s.rows;
  }
  return s;
}

void write_csv(const std::string& path, const Series& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (int64_t c = 0; c < series.cols; ++c) {
    if (c) out << ',';
    out << (c < static_cast<int64_t>(series.column_names.size())
                ? series.column_names[static_cast<size_t>(c)]
                : "c" + std::to_string(c));
  }
  out << '\n';
  char buf[64];
  for (int64_t t = 0; t < series.rows; ++t) {
    for (int64_t c = 0; c < series.cols; ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", series.at(t, c));
      out << buf;
    }
    out << '\n';
  }
}

Series normalize(const Series& s, const NormStats& stats) {
  Series out = s;
  for (int64_t t = 0; t < s.rows; ++t) {
    for (int64_t c = 0; c < s.cols; ++c) {
      out.at(t, c) = (s.at(t, c) - stats.mean[static_cast<size_t>(c)]) /
                     stats.stddev[static_cast<size_t>(c)];
    }
  }
  return out;
}

Series denormalize(const Series& s, const NormStats& stats) {
  Series out = s;
  for (int64_t t = 0; t < s.rows; ++t) {
    for (int64_t c = 0; c < s.cols; ++c) {
      out.at(t, c) = s.at(t, c) * stats.stddev[static_cast<size_t>(c)] +
                     stats.mean[static_cast<size_t>(c)];
    }
  }
  return out;
}

SplitResult split_and_normalize(const Series& series, double warmup_ratio) {
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) {
    throw std::invalid_argument("split_and_normalize: warmup_ratio must be in [0, 1)");
  }
  const int64_t warm_len = static_cast<int64_t>(std::floor(series.rows * warmup_ratio));
  if (series.rows - warm_len < 1 || (warmup_ratio > 0.0 && warm_len < 1)) {
    throw std::invalid_argument("split_and_normalize: series too short for the requested split");
  }

  NormStats stats;
  stats.mean.assign(static_cast<size_t>(series.cols), 0.0);
  stats.stddev.assign(static_cast<size_t>(series.cols), 1.0);
  if (warm_len > 0) {
    for (int64_t c = 0; c < series.cols; ++c) {
      double m = 0.0;
      for (int64_t t = 0; t < warm_len; ++t) m += series.at(t, c);
      m /= static_cast<double>(warm_len);
      double var = 0.0;
      for (int64_t t = 0; t < warm_len; ++t) {
        const double d = series.at(t, c) - m;
        var += d * d;
      }
      var /= static_cast<double>(warm_len);
      stats.mean[static_cast<size_t>(c)] = m;
      stats.stddev[static_cast<size_t>(c)] = std::max(std::sqrt(var), 1e-8);
    }
  }

  auto slice = [&](int64_t begin, int64_t end) {
    Series out;
    out.rows = end - begin;
    out.cols = series.cols;
    out.column_names = series.column_names;
    out.values.assign(series.values.begin() + begin * series.cols,
                      series.values.begin() + end * series.cols);
    return out;
  };

  SplitResult r;
  r.stats = std::move(stats);
  r.warmup = normalize(slice(0, warm_len), r.stats);
  r.online = normalize(slice(warm_len, series.rows), r.stats);
  return r;
}

int64_t window_count(int64_t series_len, int lookback, int horizon) {
  const int64_t n = series_len - lookback - horizon + 1;
  return n > 0 ? n : 0;
}

StreamSample window_at(const Series& series, int64_t i, int lookback, int horizon) {
  StreamSample s;
  s.index = i;
  s.lookback = Tensor({series.cols, lookback});
  for (int64_t c = 0; c < series.cols; ++c) {
    for (int64_t t = 0; t < lookback; ++t) s.lookback(c, t) = series.at(i + t, c);
  }
  s.target = Tensor({horizon, series.cols});
  for (int64_t t = 0; t < horizon; ++t) {
    for (int64_t c = 0; c < series.cols; ++c) s.target(t, c) = series.at(i + lookback + t, c);
  }
  return s;
}

WindowIterator::WindowIterator(const Series& series, int lookback, int horizon)
    : series_(series), lookback_(lookback), horizon_(horizon) {
  if (lookback < 1 || horizon < 1) {
    throw std::invalid_argument("WindowIterator: lookback and horizon must be >= 1");
  }
  count_ = window_count(series.rows, lookback, horizon);
  if (count_ == 0) {
    throw std::invalid_argument("WindowIterator: series length " + std::to_string(series.rows) +
                                " is too short for lookback " + std::to_string(lookback) +
                                " + horizon " + std::to_string(horizon));
  }
}

StreamSample WindowIterator::next() {
  if (!has_next()) throw std::out_of_range("WindowIterator: exhausted");
  return window_at(series_, next_++, lookback_, horizon_);
}

std::vector<StreamSample> all_windows(const Series& series, int lookback, int horizon) {
  WindowIterator it(series, lookback, horizon);
  std::vector<StreamSample> out;
  out.reserve(static_cast<size_t>(it.count()));
  while (it.has_next()) out.push_back(it.next());
  return out;
}

}  // namespace fsnet
