#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CCLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "cclab_cli_test";
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("command line exit codes and outputs") {
  const fs::path dir = scratch_dir();

  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("equilibrium --bogus 1") == 2);
  CHECK(run("equilibrium --tau 0.1 --out " + (dir / "eq.csv").string()) == 0);
  CHECK(slurp(dir / "eq.csv").rfind("w_star,q_star,p_star,residual,in_band\n", 0) == 0);

  CHECK(run("hopf-classify --c 100 --tau 0.27 --out " + (dir / "hopf.json").string()) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "hopf.json"));
  CHECK(j["type"] == "supercritical");

  CHECK(run("stability-chart --sweep c=100:300:3 --out " + (dir / "chart.csv").string()) == 0);
  CHECK(run("stability-chart --sweep nope=1:2:2") == 2);
  CHECK(run("hopf-classify --system with-averaging") == 1);

  {
    std::ofstream bad(dir / "bad.txt");
    bad << "duration = 5\nnot_a_key = 1\n";
  }
  CHECK(run("packet-sim --scenario " + (dir / "bad.txt").string()) == 2);

  CHECK(run("fluid-sim --tau 0.05 --profile paper --out " + (dir / "f" / "traj.csv").string()) == 0);
  CHECK(fs::exists(dir / "f" / "traj.csv"));
  CHECK(fs::exists(dir / "f" / "params.txt"));
  fs::remove_all(dir);
}
