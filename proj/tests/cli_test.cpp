#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kernet/config.hpp"
#include "kernet/distributed.hpp"
#include "kernet/estimator.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
  const char* env = std::getenv("KERNET_BIN");
  REQUIRE_MESSAGE(env != nullptr, "KERNET_BIN must point at the cli binary");
  return env;
}

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path capture =
      fs::temp_directory_path() / ("kernet_cli_out_" + std::to_string(counter++) + ".txt");
  const std::string command = binary_path() + " " + args + " > " + capture.string() + " 2>&1";
  const int raw = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream is(capture);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  result.output = buffer.str();
  fs::remove(capture);
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE_MESSAGE(is.good(), "missing file: " << path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path path = dir / "config.toml";
  std::ofstream os(path);
  os << body;
  return path;
}

const std::string kSmallExperiment =
    "[experiment]\n"
    "n_total = 128\n"
    "m_list = [2, 4]\n"
    "seeds = [1, 2]\n"
    "quadrature_size = 501\n"
    "[lambda]\n"
    "rule = \"power\"\n";

}  // namespace

TEST_CASE("usage errors exit 1 and help exits 0") {
  CHECK(run("").exit_code == 1);
  CHECK(run("--help").exit_code == 0);
  CHECK(run("definitely_not_a_subcommand").exit_code == 1);
  CHECK(run("fit --no-such-flag").exit_code == 1);
  const RunResult bare = run("");
  CHECK(bare.output.find("Usage") != std::string::npos);
}

TEST_CASE("config problems exit 3") {
  const fs::path dir = fresh_dir("kernet_cli_cfg");
  CHECK(run("fit --config /nonexistent/path.toml").exit_code == 3);
  const fs::path bad = write_config(dir, "[lambda]\nrule = \"nope\"\n");
  CHECK(run("fit --config " + bad.string()).exit_code == 3);
  CHECK(run("fit --override experiment.n_total=oops").exit_code == 3);
  CHECK(run("fit --override experiment.mystery=1").exit_code == 3);
  fs::remove_all(dir);
}

TEST_CASE("degenerate experiments exit 2") {
  const RunResult r = run(
      "rates --override rates.n_list=[16] experiment.m_list=[16] "
      "experiment.seeds=[1] lambda.rule=local_tuned --out " +
      fresh_dir("kernet_cli_r2").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("numerical failure") != std::string::npos);
}

TEST_CASE("selftest passes and honors quiet") {
  const RunResult loud = run("selftest");
  CHECK(loud.exit_code == 0);
  CHECK(loud.output.find("PASS") != std::string::npos);
  CHECK(loud.output.find("FAIL") == std::string::npos);
  const RunResult quiet = run("selftest --quiet");
  CHECK(quiet.exit_code == 0);
  CHECK(quiet.output.empty());
}

TEST_CASE("fit writes a loadable model") {
  const fs::path dir = fresh_dir("kernet_cli_fit");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const RunResult r = run("fit --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("fit.lambda=") != std::string::npos);
  CHECK(r.output.find("fit.rkhs_norm=") != std::string::npos);

  const kernet::KernelModel model = kernet::load_model(dir / "model.kernet");
  CHECK(model.anchors.rows() == 128);
  CHECK(model.variant == kernet::Variant::Rkn);
  CHECK(model.lambda == std::pow(128.0, -2.0 / 3.0));
  fs::remove_all(dir);
}

TEST_CASE("distribute writes a loadable manifest") {
  const fs::path dir = fresh_dir("kernet_cli_dist");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const RunResult r = run("distribute --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.exit_code == 0);
  const kernet::AveragedModel avg = kernet::load_averaged(dir / "average.manifest");
  REQUIRE(avg.blocks.size() == 2);
  CHECK(avg.blocks[0].weight == 0.5);
  fs::remove_all(dir);
}

TEST_CASE("figure1 writes both panels with clean line endings") {
  const fs::path dir = fresh_dir("kernet_cli_fig");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const RunResult r =
      run("figure1 --config " + cfg.string() + " --out " + dir.string() + " --threads 2");
  CHECK(r.exit_code == 0);

  for (const char* name : {"panel_a.csv", "panel_b.csv"}) {
    const std::string text = slurp(dir / name);
    CHECK(text.rfind("# kernet-results v1\n", 0) == 0);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.find("seed,m,variant,lambda_used,mse,rkhs_error,wall_ms\n") != std::string::npos);
  }
  const std::string panel_a = slurp(dir / "panel_a.csv");
  const std::string panel_b = slurp(dir / "panel_b.csv");
  CHECK(panel_a.find("# lambda.rule=power\n") != std::string::npos);
  CHECK(panel_b.find("# lambda.rule=local_tuned\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("every echoed header key can be overridden to reproduce the run") {
  const fs::path dir = fresh_dir("kernet_cli_echo");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const fs::path first_dir = dir / "first";
  REQUIRE(run("figure1 --config " + cfg.string() + " --out " + first_dir.string()).exit_code ==
          0);
  const std::string first = slurp(first_dir / "panel_a.csv");

  std::vector<std::string> overrides;
  std::istringstream is(first);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("# diagnostics.", 0) == 0) continue;
    if (line.rfind("# kernet-results", 0) == 0) continue;
    if (line.rfind("# ", 0) == 0 && line.find('=') != std::string::npos) {
      overrides.push_back(line.substr(2));
    }
  }
  REQUIRE(!overrides.empty());

  std::string args = "figure1";
  for (const std::string& kv : overrides) args += " --override '" + kv + "'";
  const fs::path second_dir = dir / "second";
  args += " --out " + second_dir.string();
  REQUIRE(run(args).exit_code == 0);
  const std::string second = slurp(second_dir / "panel_a.csv");
  CHECK(first == second);
  fs::remove_all(dir);
}

TEST_CASE("rates emits slopes and a summary table") {
  const fs::path dir = fresh_dir("kernet_cli_rates");
  const RunResult r = run(
      "rates --override rates.n_list=[32,64,128] experiment.seeds=[1,2] "
      "experiment.quadrature_size=501 --out " +
      dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("rate.rkn=") != std::string::npos);
  CHECK(r.output.find("rate.bcrkn=") != std::string::npos);
  const std::string csv = slurp(dir / "rates.csv");
  CHECK(csv.rfind("# kernet-rates v1\n", 0) == 0);
  CHECK(csv.find("n,variant,mean_mse\n") != std::string::npos);
  CHECK(csv.find("32,rkn,") != std::string::npos);
  CHECK(csv.find("128,bcrkn,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("diagnose reports the complexity quantities") {
  const RunResult r = run("diagnose --override diagnose.grid_size=256");
  CHECK(r.exit_code == 0);
  for (const char* key :
       {"diagnostics.kappa=", "diagnostics.effective_dimension=", "diagnostics.bound=",
        "diagnostics.capacity_beta=", "diagnostics.capacity_c0="}) {
    CHECK(r.output.find(key) != std::string::npos);
  }
  CHECK(r.output.find("diagnostics.kappa=1.4142135623730951") != std::string::npos);
}

TEST_CASE("quiet silences successful runs") {
  const fs::path dir = fresh_dir("kernet_cli_quiet");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const RunResult r =
      run("figure1 --config " + cfg.string() + " --out " + dir.string() + " --quiet");
  CHECK(r.exit_code == 0);
  CHECK(r.output.empty());
  fs::remove_all(dir);
}

TEST_CASE("thread environment fallback is accepted") {
  const fs::path dir = fresh_dir("kernet_cli_env");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const std::string command = "KERNET_THREADS=3 " + binary_path() + " figure1 --config " +
                              cfg.string() + " --out " + dir.string() + " --quiet";
  const int raw = std::system(command.c_str());
  CHECK(WIFEXITED(raw));
  CHECK(WEXITSTATUS(raw) == 0);
  const std::string here = slurp(dir / "panel_a.csv");

  const fs::path ref_dir = fresh_dir("kernet_cli_env_ref");
  REQUIRE(run("figure1 --config " + cfg.string() + " --out " + ref_dir.string() +
              " --threads 1 --quiet")
              .exit_code == 0);
  CHECK(here == slurp(ref_dir / "panel_a.csv"));
  fs::remove_all(dir);
  fs::remove_all(ref_dir);
}

TEST_CASE("identical runs are byte identical") {
  const fs::path dir = fresh_dir("kernet_cli_repeat");
  const fs::path cfg = write_config(dir, kSmallExperiment);
  const fs::path a = dir / "a";
  const fs::path b = dir / "b";
  REQUIRE(run("figure1 --config " + cfg.string() + " --out " + a.string()).exit_code == 0);
  REQUIRE(run("figure1 --config " + cfg.string() + " --out " + b.string()).exit_code == 0);
  CHECK(slurp(a / "panel_a.csv") == slurp(b / "panel_a.csv"));
  CHECK(slurp(a / "panel_b.csv") == slurp(b / "panel_b.csv"));
  fs::remove_all(dir);
}
