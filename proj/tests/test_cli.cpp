#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dart/bench.hpp"

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + PGAS_EXE + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string capture(const std::string& args) {
  const auto out = std::filesystem::temp_directory_path() / "pgas_cli_stdout.txt";
  std::system((std::string(PGAS_EXE) + " " + args + " >" + out.string() + " 2>&1").c_str());
  std::stringstream ss;
  ss << std::ifstream(out).rdbuf();
  std::filesystem::remove(out);
  return ss.str();
}

}  // namespace

TEST_CASE("run builtin programs") {
  CHECK(run("run --units 4 hello") == 0);
  CHECK(run("run --units 5 ring") == 0);
  CHECK(run("run --units 4 lock") == 0);
  CHECK(run("run --units 6 collectives") == 0);
  CHECK(run("run -n 1 ring") == 0);
  CHECK(run("run --units 3 --trace ring") == 0);
  const auto out = capture("run --units 3 hello");
  CHECK(out.find("unit 2: status 2") != std::string::npos);
}

TEST_CASE("run argument and config errors") {
  CHECK(run("run --units 2 nosuchprogram") == 2);
  CHECK(run("run --units 0 hello") != 0);
  CHECK(run("") != 0);
  CHECK(run("run --units 2 hello", "PGAS_TEAMLIST_CAP=abc") == 2);
  CHECK(run("run --units 2 --teamlist-cap 0 hello") == 2);
  // Flags override the environment.
  CHECK(run("run --units 2 --local-pool-bytes 65536 ring", "PGAS_LOCAL_POOL_BYTES=4") == 0);
  CHECK(run("run --units 2 ring", "PGAS_LOCAL_POOL_BYTES=4") == 2);
}

TEST_CASE("bench writes a CSV that parses back") {
  const auto csv = std::filesystem::temp_directory_path() / "pgas_cli_bench.csv";
  REQUIRE(run("bench --op get --mode nonblocking --metric dtit --max-size 256 --reps 30 --out " +
              csv.string()) == 0);
  const auto series = dart::bench::load_csv(csv.string());
  CHECK(series.size() == 2 * 9);
  CHECK(series.front().op == dart::bench::Op::get);
  CHECK(std::filesystem::exists(csv.string() + ".fit.txt"));
  std::filesystem::remove(csv);
  std::filesystem::remove(csv.string() + ".fit.txt");
}

TEST_CASE("bench rejects bad configurations") {
  const auto csv = (std::filesystem::temp_directory_path() / "pgas_cli_bad.csv").string();
  CHECK(run("bench --units 1 --max-size 8 --out " + csv) == 2);
  CHECK(run("bench --metric dtit --mode blocking --max-size 8 --out " + csv) == 2);
  CHECK(run("bench --reps 10 --max-size 8 --out " + csv) == 2);
  CHECK(run("bench --pair 0 0 --max-size 8 --out " + csv) == 2);
  CHECK(run("bench --op swap --out " + csv) != 0);
  CHECK(run("bench --max-size 8") != 0);
  CHECK(run("bench --max-size 8 --out /nonexistent-dir/x.csv") == 1);
  CHECK(run("bench --units 3 --pair 2 1 --max-size 8 --out " + csv) == 0);
  std::filesystem::remove(csv);
  std::filesystem::remove(csv + ".fit.txt");
}
