#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MIXDENS_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("mixdens_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("fit and evaluate from the command line") {
  TempDir dir("fit");
  const std::string out = (dir.path / "npmle").string();
  REQUIRE(run("fit --method npmle --model pmm --n 200 --seed 3 --out-dir " + out) == 0);
  CHECK(fs::exists(fs::path(out) / "npmle.json"));
  CHECK(fs::exists(fs::path(out) / "manifest.json"));
  const auto manifest = nlohmann::json::parse(slurp(fs::path(out) / "manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK(manifest.contains("argv"));

  const std::string boot = (dir.path / "boot").string();
  REQUIRE(run("fit --method boot --boot-B 20 --model pmm --n 200 --seed 3 --out-dir " + boot) == 0);
  CHECK(fs::exists(fs::path(boot) / "ensemble.jsonl"));
  CHECK(slurp(fs::path(boot) / "draws.csv").rfind("theta\n", 0) == 0);

  const std::string ev = (dir.path / "eval").string();
  REQUIRE(run("eval --fit-dir " + out + " --fit-dir " + boot + " --model pmm --out-dir " + ev) == 0);
  CHECK(fs::exists(fs::path(ev) / "table.csv"));
  const auto metrics = nlohmann::json::parse(slurp(fs::path(ev) / "metrics.json"));
  CHECK(metrics.dump().find("W1") != std::string::npos);
}

TEST_CASE("the same seed gives the same output") {
  TempDir dir("seed");
  const auto a = dir.path / "a", b = dir.path / "b";
  REQUIRE(run("fit --method boot --boot-B 10 --model bbm --n 100 --seed 5 --threads 1 --out-dir " + a.string()) == 0);
  REQUIRE(run("fit --method boot --boot-B 10 --model bbm --n 100 --seed 5 --threads 3 --out-dir " + b.string()) == 0);
  CHECK(slurp(a / "draws.csv") == slurp(b / "draws.csv"));
  CHECK(slurp(a / "ensemble.jsonl") == slurp(b / "ensemble.jsonl"));
}

TEST_CASE("bad input fails with a nonzero status") {
  TempDir dir("bad");
  CHECK(run("fit --method nope --model pmm --n 10 --out-dir " + dir.path.string()) != 0);
  CHECK(run("fit --method npmle --model nope --n 10 --out-dir " + dir.path.string()) != 0);
  CHECK(run("fit --method npmle --data /nonexistent.csv --family poisson --out-dir " + dir.path.string()) != 0);
  CHECK(run("lps --dataset norberg --method boot --out-dir " + dir.path.string()) != 0);
  CHECK(run("nosuchcommand") != 0);
}
