// End-to-end checks of the command-line tool, driven through the real binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code;
  std::string output;
};

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string out_file =
      (fs::temp_directory_path() / ("fsnet_cli_out_" + std::to_string(counter++) + ".txt"))
          .string();
  const std::string cmd = std::string(FSNET_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(out_file);
  int code = -1;
  if (WIFEXITED(status)) code = WEXITSTATUS(status);
  return {code, ss.str()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string tmp(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

// Small enough to finish in well under a second.
std::string tiny_run_flags(const std::string& seeds = "1") {
  return "--data ar1 --set data.length=160 --lookback 8 --horizon 2 --num-blocks 1 "
         "--filters 4 --seeds " +
         seeds;
}

}  // namespace

TEST_CASE("gen-data s-abrupt writes 6000 rows and is byte-stable under the seed") {
  const std::string f1 = tmp("fsnet_sa_1.csv");
  const std::string f2 = tmp("fsnet_sa_2.csv");
  CmdResult r = run_cli("gen-data s-abrupt --seed 1 --out " + f1);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("6000 rows x 1 columns") != std::string::npos);
  CHECK(r.output.find("1000 2000 3000 4000 5000") != std::string::npos);

  CHECK(run_cli("gen-data s-abrupt --seed 1 --out " + f2).exit_code == 0);
  CHECK(read_file(f1) == read_file(f2));

  // Count data rows (header + 6000).
  std::istringstream lines(read_file(f1));
  int n = 0;
  std::string line;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 6001);

  CHECK(run_cli("gen-data s-abrupt --seed 2 --out " + f2).exit_code == 0);
  CHECK(read_file(f1) != read_file(f2));
  fs::remove(f1);
  fs::remove(f2);
}

TEST_CASE("gen-data s-gradual writes 5000 rows") {
  const std::string f = tmp("fsnet_sg.csv");
  CmdResult r = run_cli("gen-data s-gradual --seed 3 --out " + f);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("5000 rows") != std::string::npos);
  fs::remove(f);
}

TEST_CASE("gen-data rejects a non-stationary coefficient") {
  CmdResult r = run_cli("gen-data ar1 --phi 1.5 --out " + tmp("nope.csv"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("|phi| < 1") != std::string::npos);
}

TEST_CASE("run emits a summary with mean and std fields") {
  const std::string dir = tmp("fsnet_cli_run");
  fs::remove_all(dir);
  CmdResult r = run_cli("run --learner fsnet " + tiny_run_flags("1,2") + " --out-dir " + dir);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("MSE") != std::string::npos);
  CHECK(r.output.find("+/-") != std::string::npos);

  nlohmann::json summary;
  std::ifstream(dir + "/summary.json") >> summary;
  CHECK(summary["per_seed"].size() == 2);
  CHECK(summary.contains("mean_mse"));
  CHECK(summary.contains("std_mse"));
  CHECK(summary["param_counts"]["adapter"].get<long long>() > 0);
  CHECK(fs::exists(dir + "/metrics_seed1.jsonl"));
  CHECK(fs::exists(dir + "/curve_seed2.csv"));
  fs::remove_all(dir);
}

TEST_CASE("fsnet and onlinetcn runs on identical data produce different metrics") {
  const std::string d1 = tmp("fsnet_cli_cmp_fsnet");
  const std::string d2 = tmp("fsnet_cli_cmp_tcn");
  fs::remove_all(d1);
  fs::remove_all(d2);
  CHECK(run_cli("run --learner fsnet " + tiny_run_flags() + " --out-dir " + d1).exit_code == 0);
  CHECK(run_cli("run --learner onlinetcn " + tiny_run_flags() + " --out-dir " + d2).exit_code == 0);
  nlohmann::json a, b;
  std::ifstream(d1 + "/summary.json") >> a;
  std::ifstream(d2 + "/summary.json") >> b;
  CHECK(a["mean_mse"].get<double>() != b["mean_mse"].get<double>());
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("missing data file exits with code 2 and names the path") {
  CmdResult r = run_cli("run --data /no/such/file.csv");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("/no/such/file.csv") != std::string::npos);
}

TEST_CASE("override precedence: flags beat config file, config file beats defaults") {
  const std::string cfg_path = tmp("fsnet_cli_cfg.json");
  const std::string dir = tmp("fsnet_cli_prec");
  fs::remove_all(dir);
  {
    std::ofstream out(cfg_path);
    out << R"({"data":{"kind":"ar1","length":160},"horizon":4,"lookback":8,)"
        << R"("num_blocks":1,"filters":4,"seeds":[1],"fsnet":{"tau":0.7}})";
  }
  CmdResult r = run_cli("run --config " + cfg_path +
                        " --horizon 2 --set fsnet.gamma_prime=0.2 --out-dir " + dir);
  CHECK(r.exit_code == 0);
  nlohmann::json summary;
  std::ifstream(dir + "/summary.json") >> summary;
  CHECK(summary["config"]["horizon"].get<int>() == 2);                 // flag wins
  CHECK(summary["config"]["fsnet"]["tau"].get<double>() == 0.7);       // file wins over default
  CHECK(summary["config"]["fsnet"]["gamma_prime"].get<double>() == 0.2);  // --set applied
  fs::remove(cfg_path);
  fs::remove_all(dir);
}

TEST_CASE("unknown config keys are rejected") {
  CmdResult r = run_cli("run " + tiny_run_flags() + " --set fsnet.bogus=1");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("bogus") != std::string::npos);
}

TEST_CASE("summarize tabulates summary files") {
  const std::string dir = tmp("fsnet_cli_sum");
  fs::remove_all(dir);
  CHECK(run_cli("run --learner onlinetcn " + tiny_run_flags() + " --out-dir " + dir + "/cell1")
            .exit_code == 0);
  CmdResult r = run_cli("summarize --dir " + dir);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("onlinetcn") != std::string::npos);
  CHECK(r.output.find("ar1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("ablate emits the four-variant grid over one shared stream") {
  const std::string dir = tmp("fsnet_cli_ablate");
  fs::remove_all(dir);
  CmdResult r = run_cli("ablate " + tiny_run_flags() + " --out-dir " + dir);
  CHECK(r.exit_code == 0);
  for (const char* v : {"fsnet-large", "fsnet", "fsnet-nomem", "fsnet-naive"}) {
    CHECK(r.output.find(v) != std::string::npos);
  }
  nlohmann::json j;
  std::ifstream(dir + "/ablation.json") >> j;
  CHECK(j["variants"].size() == 4);
  for (auto& [name, cell] : j["variants"].items()) {
    INFO(name);
    CHECK(cell.contains("mse"));
    CHECK(cell.contains("mae"));
  }
  // All variants saw the same stream: identical config hash basis per seed
  // means the per-variant summaries reference the same data spec.
  nlohmann::json s1, s2;
  std::ifstream(dir + "/fsnet/summary.json") >> s1;
  std::ifstream(dir + "/fsnet-naive/summary.json") >> s2;
  CHECK(s1["config"]["data"] == s2["config"]["data"]);
  CHECK(s1["config"]["seeds"] == s2["config"]["seeds"]);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck passes on a fresh build and fails under fault injection") {
  CmdResult ok = run_cli("gradcheck");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("gradcheck passed") != std::string::npos);

  CmdResult bad = run_cli("gradcheck --inject-fault linear.weight");
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("linear.weight") != std::string::npos);
  CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("manifest files select csv data and windowing") {
  const std::string csv = tmp("fsnet_cli_manifest_data.csv");
  const std::string manifest = tmp("fsnet_cli_manifest.json");
  const std::string dir = tmp("fsnet_cli_manifest_out");
  fs::remove_all(dir);
  CHECK(run_cli("gen-data ar1 --phi 0.5 --length 160 --seed 4 --out " + csv).exit_code == 0);
  {
    std::ofstream out(manifest);
    out << R"({"csv":")" << csv << R"(","feature_columns":["x"],"lookback":8,"horizon":2,)"
        << R"("warmup_ratio":0.25,"seed":1})";
  }
  CmdResult r = run_cli("run --learner onlinetcn --data " + manifest +
                        " --num-blocks 1 --filters 4 --out-dir " + dir);
  CHECK(r.exit_code == 0);
  nlohmann::json summary;
  std::ifstream(dir + "/summary.json") >> summary;
  CHECK(summary["config"]["data"]["kind"] == "csv");
  CHECK(summary["config"]["lookback"].get<int>() == 8);
  fs::remove(csv);
  fs::remove(manifest);
  fs::remove_all(dir);
}
