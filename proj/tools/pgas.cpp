#include <CLI11.hpp>

#include <iostream>
#include <vector>

#include "dart/bench.hpp"
#include "dart/error.hpp"
#include "dart/runtime.hpp"
#include "programs.hpp"

namespace {

void add_config_flags(CLI::App* cmd, dart::RuntimeConfig& cfg) {
  cmd->add_option("--units,-n", cfg.unit_count, "Number of units")->check(CLI::PositiveNumber);
  cmd->add_option("--local-pool-bytes", cfg.local_pool_bytes,
                  "Non-collective pool per unit (env PGAS_LOCAL_POOL_BYTES)");
  cmd->add_option("--team-pool-bytes", cfg.team_pool_bytes,
                  "Collective pool per team member (env PGAS_TEAM_POOL_BYTES)");
  cmd->add_option("--teamlist-cap", cfg.teamlist_capacity,
                  "Teamlist slots per unit (env PGAS_TEAMLIST_CAP)");
  cmd->add_flag("--trace", cfg.trace, "Print every transport operation to stderr");
}

int run_program(const dart::RuntimeConfig& cfg, const std::string& name) {
  const auto& programs = pgas::builtin_programs();
  auto it = programs.find(name);
  if (it == programs.end()) {
    std::cerr << "unknown program '" << name << "'; available:\n";
    for (const auto& [key, b] : programs) std::cerr << "  " << key << "  " << b.description << "\n";
    return 2;
  }
  auto result = dart::launch(cfg, it->second.program);
  std::cout << result.report();
  for (std::size_t i = 0; i < result.errors.size(); ++i) {
    if (!result.errors[i].empty()) return 1;
  }
  if (result.leaked_regions || result.leaked_messages) return 1;
  // Programs other than hello report 0 for success.
  if (name != "hello") {
    for (int s : result.statuses) {
      if (s != 0) return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PGAS runtime launcher and microbenchmarks"};
  app.require_subcommand(1);

  // Environment first; command-line flags parsed below override it.
  dart::RuntimeConfig env_cfg;
  try {
    env_cfg = dart::RuntimeConfig::from_env();
  } catch (const dart::Error& e) {
    std::cerr << "pgas: " << e.what() << "\n";
    return 2;
  }

  dart::RuntimeConfig run_cfg = env_cfg;
  std::string program;
  auto* run = app.add_subcommand("run", "Run a builtin SPMD program");
  add_config_flags(run, run_cfg);
  std::string program_help = "Builtin program:";
  for (const auto& [key, b] : pgas::builtin_programs()) program_help += " " + key;
  run->add_option("program", program, program_help)->required();

  dart::RuntimeConfig bench_cfg = env_cfg;
  bench_cfg.unit_count = 2;
  dart::bench::BenchSpec spec;
  std::string op = "put", mode = "blocking", metric = "dtct", out_path;
  std::size_t min_size = 1, max_size = dart::bench::kDefaultMaxSize;
  std::vector<dart::UnitId> pair;
  auto* bench = app.add_subcommand("bench", "Measure DART vs raw transport put/get");
  add_config_flags(bench, bench_cfg);
  bench->add_option("--op", op, "put|get")->check(CLI::IsMember({"put", "get"}));
  bench->add_option("--mode", mode, "blocking|nonblocking")
      ->check(CLI::IsMember({"blocking", "nonblocking"}));
  bench->add_option("--metric", metric, "dtct|dtit|bw")
      ->check(CLI::IsMember({"dtct", "dtit", "bw"}));
  bench->add_option("--min-size", min_size, "Smallest message in bytes");
  bench->add_option("--max-size", max_size, "Largest message in bytes");
  bench->add_option("--reps", spec.reps, "Timed samples per size (>= 30)");
  bench->add_option("--warmup", spec.warmup, "Discarded samples per size");
  bench->add_option("--batch", spec.batch, "Ops per completion-time sample");
  bench->add_option("--window", spec.window, "Overlapping ops per bandwidth sample");
  bench->add_option("--pair", pair, "Origin and target unit")->expected(2);
  bench->add_option("--out", out_path, "CSV output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_program(run_cfg, program);
    }
    spec.op = dart::bench::parse_op(op);
    spec.mode = dart::bench::parse_mode(mode);
    spec.metric = dart::bench::parse_metric(metric);
    spec.sizes = dart::bench::pow2_sizes(min_size, max_size);
    if (pair.size() == 2) {
      spec.origin = pair[0];
      spec.target = pair[1];
    }
    const dart::bench::Result result = dart::bench::run_benchmark(bench_cfg, spec);
    dart::bench::emit_report(std::span(&result, 1), out_path);
    std::cout << dart::bench::fit_summary(std::span(&result, 1));
    std::cout << "wrote " << out_path << " and " << out_path << ".fit.txt\n";
    return 0;
  } catch (const dart::Error& e) {
    std::cerr << "pgas: " << e.what() << "\n";
    return e.code() == dart::Errc::invalid_config ? 2 : 1;
  }
}
