#include "doctest.h"
#include "support.hpp"

#include "hfdr/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace hfdr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hfdr_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

// 20 x 5 design with a response driven by the first two columns.
fs::path toy_csv(const fs::path& dir) {
  Rng rng(7);
  const Dataset data = test::linear_instance(20, 5, 2, 1.0, rng);
  const fs::path path = dir / "toy.csv";
  std::ofstream f(path);
  f.precision(17);
  f << "x1,x2,x3,x4,x5,y\n";
  for (Index i = 0; i < 20; ++i) {
    for (Index j = 0; j < 5; ++j) f << data.x()(i, j) << ',';
    f << data.y()(i) << '\n';
  }
  return path;
}

int run_cli(const std::string& args) {
  const std::string command = std::string(HFDR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig toy_config(const fs::path& dir, const std::string& out) {
  RunConfig cfg;
  cfg.data_path = toy_csv(dir).string();
  cfg.response_column = "y";
  cfg.out = (dir / out).string();
  cfg.seed = 4;
  cfg.quiet = true;
  cfg.n_lambda = 6;
  return resolve(cfg);
}

}  // namespace

TEST_CASE("estimate writes one row per tuning value") {
  const fs::path dir = scratch("estimate");
  const RunConfig cfg = toy_config(dir, "a");
  run(cfg);
  const auto curves = lines(slurp(dir / "a" / "curves.csv"));
  REQUIRE(curves.size() == 2 + 6);
  CHECK(curves[0] == "# seed=4, config_hash=" + config_hash(cfg));
  CHECK(curves[1] == "tuning,hfdr,r");
  const auto contributions = lines(slurp(dir / "a" / "contributions.csv"));
  CHECK(contributions.size() == 2 + 6 * 5);
  CHECK(fs::exists(dir / "a" / "run.json"));
  CHECK(slurp(dir / "a" / "run.json").find(config_hash(cfg)) != std::string::npos);
}

TEST_CASE("outputs are byte-identical across runs and worker counts") {
  const fs::path dir = scratch("repeat");
  RunConfig cfg = toy_config(dir, "one");
  cfg.workers = 1;
  run(cfg);
  cfg.out = (dir / "two").string();
  run(cfg);
  cfg.out = (dir / "four").string();
  cfg.workers = 4;
  run(cfg);
  for (const char* file : {"curves.csv", "contributions.csv", "run.json"}) {
    const std::string ref = slurp(dir / "one" / file);
    CHECK(slurp(dir / "two" / file) == ref);
    CHECK(slurp(dir / "four" / file) == ref);
  }
  cfg.workers = 1;
  CHECK(config_hash(cfg) == config_hash(toy_config(dir, "one")));
  cfg.seed = 5;
  CHECK(config_hash(cfg) != config_hash(toy_config(dir, "one")));
}

TEST_CASE("cv and bootstrap commands") {
  const fs::path dir = scratch("commands");
  RunConfig cfg = toy_config(dir, "cv");
  cfg.command = Command::cv;
  cfg.folds = 4;
  run(cfg);
  const auto cv = lines(slurp(dir / "cv" / "curves.csv"));
  CHECK(cv.size() == 8);
  CHECK(cv[1] == "tuning,hfdr,cv_error,cv_se,r");

  cfg.command = Command::bootstrap_se;
  cfg.boot_m = 3;
  cfg.out = (dir / "boot").string();
  run(cfg);
  CHECK(lines(slurp(dir / "boot" / "curves.csv"))[1] == "tuning,hfdr,hfdr_se,r");
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5, 0.0}) CHECK(std::stod(format_number(x)) == x);
  CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("config files and flags") {
  RunConfig cfg;
  apply_config_json(R"({"mc": 7, "seed": 3, "zeta": 0.2})", cfg);
  CHECK(cfg.mc == 7);
  CHECK(cfg.seed == 3);
  CHECK(cfg.zeta == 0.2);
  CHECK_THROWS_AS(apply_config_json(R"({"no_such_key": 1})", cfg), InvalidArgument);

  const fs::path dir = scratch("precedence");
  const fs::path data = toy_csv(dir);
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"mc": 7, "seed": 3, "response": "y", "n_lambda": 3})";
  }
  const std::string base = "estimate --quiet --data " + data.string() + " --config " + (dir / "cfg.json").string();
  REQUIRE(run_cli(base + " --seed 5 --out " + (dir / "out").string()) == 0);
  const std::string run_json = slurp(dir / "out" / "run.json");
  CHECK(run_json.find("\"seed\": 5") != std::string::npos);
  CHECK(run_json.find("\"mc\": 7") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const fs::path data = toy_csv(dir);
  const std::string out = " --quiet --out " + (dir / "out").string();
  CHECK(run_cli("estimate --data " + data.string() + " --response y" + out) == 0);
  CHECK(run_cli("estimate --data " + data.string() + " --response y --zeta 1.5" + out) == 1);
  CHECK(run_cli("estimate --data " + data.string() + " --response y --grid 0.1,0.2" + out) == 1);
  CHECK(run_cli("estimate --data " + (dir / "missing.csv").string() + " --response y" + out) == 2);
  CHECK(run_cli("estimate --data " + data.string() + " --response nothing" + out) == 2);
  {
    std::ofstream f(dir / "bad.csv");
    f << "x1,y\n1,2\nfoo,3\n";
  }
  CHECK(run_cli("estimate --data " + (dir / "bad.csv").string() + " --response y" + out) == 2);
  CHECK(exit_code_for(NumericalError("x")) == 3);
  CHECK(exit_code_for(InvalidArgument("x")) == 1);
  CHECK(exit_code_for(DataError("x")) == 2);
}
