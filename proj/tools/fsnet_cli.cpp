// Command-line front end: synthetic dataset generation, experiment runs,
// ablation grids, result summaries and the finite-difference check suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fsnet/gradcheck.hpp"
#include "fsnet/harness.hpp"
#include "fsnet/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CliError : std::runtime_error {
  int code;
  CliError(int code_, const std::string& what) : std::runtime_error(what), code(code_) {}
};

// Resolves the --data flag: generator name, .csv path or manifest .json.
void apply_data_flag(fsnet::ExperimentConfig& config, const std::string& data) {
  if (data == "s-abrupt" || data == "s-gradual" || data == "ar1") {
    config.data.kind = data;
    return;
  }
  if (data.size() > 5 && data.substr(data.size() - 5) == ".json") {
    if (!fs::exists(data)) throw CliError(kExitConfig, "manifest file not found: " + data);
    fsnet::apply_manifest(config, data);
    return;
  }
  if (data.size() > 4 && data.substr(data.size() - 4) == ".csv") {
    if (!fs::exists(data)) throw CliError(kExitConfig, "data file not found: " + data);
    config.data.kind = "csv";
    config.data.path = data;
    return;
  }
  throw CliError(kExitConfig, "unrecognized --data value \"" + data +
                                  "\" (expected s-abrupt, s-gradual, ar1, a .csv or a .json manifest)");
}

json parse_override_value(const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  try {
    size_t pos = 0;
    if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
        raw.find('E') != std::string::npos) {
      const double d = std::stod(raw, &pos);
      if (pos == raw.size()) return d;
    } else {
      const long long v = std::stoll(raw, &pos);
      if (pos == raw.size()) return v;
    }
  } catch (const std::exception&) {
  }
  return raw;
}

// key=value overrides with dotted paths into the config document.
void apply_overrides(json& doc, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CliError(kExitConfig, "override \"" + kv + "\" is not of the form key=value");
    }
    const std::string key = kv.substr(0, eq);
    json* node = &doc;
    size_t start = 0;
    while (true) {
      const size_t dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (dot == std::string::npos) {
        (*node)[part] = parse_override_value(kv.substr(eq + 1));
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
}

void print_summary_row(const fsnet::ExperimentResult& r) {
  std::printf("%-12s H=%-3d MSE %.3f +/- %.3f   MAE %.3f +/- %.3f   (%zu seeds, %.1fs)\n",
              r.config.learner.c_str(), r.config.horizon, r.mean_mse, r.std_mse, r.mean_mae,
              r.std_mae, r.seeds.size(), r.wall_time_s);
}

int cmd_gen_data(const std::string& spec, uint64_t seed, double phi, int64_t length,
                 const std::string& out_path) {
  fsnet::DataSpec ds;
  if (spec == "s-abrupt" || spec == "s-gradual") {
    ds.kind = spec;
  } else if (spec == "ar1") {
    ds.kind = "ar1";
    ds.phi = phi;
    ds.length = length;
  } else {
    throw CliError(kExitConfig, "unknown data spec \"" + spec + "\"");
  }
  fsnet::Series s;
  try {
    s = fsnet::build_series(ds, seed);
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitConfig, e.what());
  }
  fsnet::write_csv(out_path, s);
  std::printf("wrote %s: %lld rows x %lld columns\n", out_path.c_str(),
              static_cast<long long>(s.rows), static_cast<long long>(s.cols));
  const auto print_bounds = [](const std::vector<int64_t>& b) {
    std::printf("segment boundaries:");
    for (int64_t v : b) std::printf(" %lld", static_cast<long long>(v));
    std::printf("\n");
  };
  if (spec == "s-abrupt") print_bounds(fsnet::s_abrupt_boundaries());
  if (spec == "s-gradual") print_bounds(fsnet::s_gradual_boundaries());
  return 0;
}

fsnet::ExperimentConfig build_config(const std::string& config_path, const std::string& data,
                                     const std::string& learner, int horizon, int lookback,
                                     const std::vector<uint64_t>& seeds, const std::string& out_dir,
                                     bool verbose, int threads, int num_blocks, int filters,
                                     double lr, const std::vector<std::string>& sets,
                                     const CLI::App* cmd) {
  // Precedence: built-in defaults < config file < CLI flags.
  json doc = fsnet::config_to_json(fsnet::ExperimentConfig{});
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw CliError(kExitConfig, "config file not found: " + config_path);
    json file_doc;
    try {
      in >> file_doc;
    } catch (const std::exception& e) {
      throw CliError(kExitConfig, std::string("config parse error: ") + e.what());
    }
    doc.merge_patch(file_doc);
  }
  apply_overrides(doc, sets);

  fsnet::ExperimentConfig config;
  try {
    config = fsnet::config_from_json(doc);
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, e.what());
  }

  const auto given = [&](const char* name) {
    const CLI::Option* o = cmd->get_option_no_throw(name);
    return o && o->count() > 0;
  };
  if (given("--data")) apply_data_flag(config, data);
  if (given("--learner")) config.learner = learner;
  if (given("--horizon")) config.horizon = horizon;
  if (given("--lookback")) config.lookback = lookback;
  if (given("--seeds")) config.seeds = seeds;
  if (given("--out-dir")) config.out_dir = out_dir;
  if (given("--verbose")) config.verbose = verbose;
  if (given("--threads")) config.threads = threads;
  if (given("--num-blocks")) config.num_blocks = num_blocks;
  if (given("--filters")) config.filters = filters;
  if (given("--lr")) config.lr = lr;

  if (config.data.kind == "csv" && !fs::exists(config.data.path)) {
    throw CliError(kExitConfig, "data file not found: " + config.data.path);
  }
  const auto errors = fsnet::validate_config(config);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw CliError(kExitConfig, msg);
  }
  return config;
}

int cmd_run(const fsnet::ExperimentConfig& config) {
  fsnet::ExperimentResult r = fsnet::run_experiment(config);
  print_summary_row(r);
  if (!config.out_dir.empty()) {
    std::printf("results in %s (config hash %s)\n", config.out_dir.c_str(), r.config_hash.c_str());
  }
  return 0;
}

int cmd_ablate(fsnet::ExperimentConfig base) {
  static const char* variants[] = {"fsnet-large", "fsnet", "fsnet-nomem", "fsnet-naive"};
  const std::string out_dir = base.out_dir;
  std::vector<fsnet::ExperimentResult> results;
  for (const char* v : variants) {
    fsnet::ExperimentConfig c = base;
    c.learner = v;
    c.out_dir = out_dir.empty() ? "" : out_dir + "/" + v;
    std::fprintf(stderr, "running %s ...\n", v);
    results.push_back(fsnet::run_experiment(c));
  }

  std::printf("\n%-18s", "variant:");
  for (const auto& r : results) std::printf(" %12s", r.config.learner.c_str());
  std::printf("\n%-18s", "MSE");
  for (const auto& r : results) std::printf(" %12.3f", r.mean_mse);
  std::printf("\n%-18s", "MAE");
  for (const auto& r : results) std::printf(" %12.3f", r.mean_mae);
  std::printf("\n");

  if (!out_dir.empty()) {
    json j;
    j["data"] = base.data.kind;
    j["horizon"] = base.horizon;
    for (const auto& r : results) {
      j["variants"][r.config.learner] = {{"mse", r.mean_mse},
                                         {"mae", r.mean_mae},
                                         {"std_mse", r.std_mse},
                                         {"std_mae", r.std_mae}};
    }
    fs::create_directories(out_dir);
    fsnet::atomic_write(out_dir + "/ablation.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_summarize(const std::string& dir) {
  if (!fs::exists(dir)) throw CliError(kExitConfig, "directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::printf("no summary.json files under %s\n", dir.c_str());
    return 0;
  }
  std::printf("%-14s %-10s %4s %10s %10s %10s %10s  %s\n", "learner", "data", "H", "mse", "std",
              "mae", "std", "hash");
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    in >> j;
    std::printf("%-14s %-10s %4d %10.4f %10.4f %10.4f %10.4f  %s\n",
                j["config"]["learner"].get<std::string>().c_str(),
                j["config"]["data"]["kind"].get<std::string>().c_str(),
                j["config"]["horizon"].get<int>(), j["mean_mse"].get<double>(),
                j["std_mse"].get<double>(), j["mean_mae"].get<double>(),
                j["std_mae"].get<double>(), j["config_hash"].get<std::string>().c_str());
  }
  return 0;
}

int cmd_gradcheck(double tolerance, const std::string& inject_fault) {
  fsnet::GradCheckReport report = fsnet::run_gradcheck_suite(tolerance, inject_fault);
  for (const auto& e : report.entries) {
    std::printf("%-36s max rel err %.3e  %s\n", e.op.c_str(), e.max_rel_err,
                e.pass ? "ok" : "FAIL");
  }
  if (!report.all_pass()) {
    const auto* w = report.worst();
    std::printf("gradcheck FAILED: worst op %s (max rel err %.3e, tolerance %.1e)\n",
                w->op.c_str(), w->max_rel_err, report.tolerance);
    return kExitRuntime;
  }
  std::printf("gradcheck passed: %zu checks below %.1e\n", report.entries.size(),
              report.tolerance);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online time-series forecasting with fast-and-slow learning"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic series as CSV");
  std::string gen_spec;
  uint64_t gen_seed = 1;
  double gen_phi = 0.6;
  int64_t gen_length = 6000;
  std::string gen_out = "data.csv";
  gen->add_option("spec", gen_spec, "s-abrupt | s-gradual | ar1")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--phi", gen_phi, "AR coefficient (ar1 only)");
  gen->add_option("--length", gen_length, "series length (ar1 only)");
  gen->add_option("--out", gen_out, "output CSV path");

  // shared run/ablate options
  std::string config_path, data_flag, learner = "fsnet", out_dir;
  int horizon = 1, lookback = 60, threads = 1, num_blocks = 10, filters = 64;
  double lr = 1e-3;
  bool verbose = false;
  std::vector<uint64_t> seeds;
  std::vector<std::string> sets;
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON");
    cmd->add_option("--data", data_flag, "s-abrupt | s-gradual | ar1 | file.csv | manifest.json");
    cmd->add_option("--horizon", horizon, "forecast horizon H");
    cmd->add_option("--lookback", lookback, "look-back window E");
    cmd->add_option("--seeds,--seed", seeds, "seeds (comma separated)")->delimiter(',');
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_flag("--verbose", verbose, "emit the per-layer trigger-event log");
    cmd->add_option("--threads", threads, "parallel workers over seeds");
    cmd->add_option("--num-blocks", num_blocks, "TCN blocks");
    cmd->add_option("--filters", filters, "filters per layer");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--set", sets, "override config keys, e.g. --set fsnet.tau=0.8");
  };

  auto* run = app.add_subcommand("run", "Run one experiment (all seeds)");
  run->add_option("--learner", learner, "fsnet | fsnet-nomem | fsnet-naive | fsnet-large | onlinetcn | er");
  add_run_options(run);

  auto* ablate = app.add_subcommand("ablate", "Run the four-variant ablation grid");
  add_run_options(ablate);

  auto* summarize = app.add_subcommand("summarize", "Tabulate summary.json files under a directory");
  std::string sum_dir = ".";
  summarize->add_option("--dir", sum_dir, "directory to scan")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks on every primitive");
  double gc_tol = 1e-5;
  std::string gc_fault;
  gradcheck->add_option("--tolerance", gc_tol, "max relative error");
  gradcheck->add_option("--inject-fault", gc_fault, "corrupt one op's backward (harness self-test)")
      ->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_spec, gen_seed, gen_phi, gen_length, gen_out);
    if (run->parsed()) {
      auto config = build_config(config_path, data_flag, learner, horizon, lookback, seeds,
                                 out_dir, verbose, threads, num_blocks, filters, lr, sets, run);
      return cmd_run(config);
    }
    if (ablate->parsed()) {
      auto config = build_config(config_path, data_flag, learner, horizon, lookback, seeds,
                                 out_dir, verbose, threads, num_blocks, filters, lr, sets, ablate);
      return cmd_ablate(config);
    }
    if (summarize->parsed()) return cmd_summarize(sum_dir);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_tol, gc_fault);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
