#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dart/bench.hpp"
#include "support.hpp"

using namespace dart;
using namespace dart::bench;
using support::throws_errc;

namespace {

// Two-pass mean and sample deviation, written out independently.
std::pair<double, double> oracle_stats(const std::vector<double>& xs) {
  long double sum = 0;
  for (double x : xs) sum += x;
  const long double mean = sum / xs.size();
  long double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {static_cast<double>(mean),
          xs.size() > 1 ? static_cast<double>(std::sqrt(ss / (xs.size() - 1))) : 0.0};
}

Series synthetic(Layer layer, const std::vector<std::size_t>& sizes, std::vector<double> means,
                 double stddev, std::size_t n) {
  Series s;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    s.push_back(Measurement{layer, Op::put, Mode::blocking, Metric::dtct, sizes[i], means[i],
                            stddev, n});
  }
  return s;
}

BenchSpec small_spec(Metric metric, Mode mode) {
  BenchSpec spec;
  spec.metric = metric;
  spec.mode = mode;
  spec.sizes = {1, 8, 64};
  spec.reps = 30;
  spec.warmup = 2;
  return spec;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pgas_test_" + name);
}

}  // namespace

TEST_CASE("enum names") {
  CHECK(parse_op("get") == Op::get);
  CHECK(parse_mode("nonblocking") == Mode::nonblocking);
  CHECK(parse_metric("bw") == Metric::bw);
  CHECK(parse_layer("raw") == Layer::raw);
  CHECK(to_string(Metric::dtit) == "dtit");
  CHECK(throws_errc(Errc::invalid_config, [] { parse_op("swap"); }));
  CHECK(throws_errc(Errc::invalid_config, [] { parse_metric(""); }));
}

TEST_CASE("default size sweep is 1..2^21 in powers of two") {
  const auto sizes = BenchSpec{}.sizes;
  REQUIRE(sizes.size() == 22);
  for (std::size_t i = 0; i < sizes.size(); ++i) CHECK(sizes[i] == (std::size_t{1} << i));
  CHECK(pow2_sizes(3, 16) == std::vector<std::size_t>{4, 8, 16});
  CHECK(pow2_sizes(5, 4).empty());
}

TEST_CASE("benchmark configuration validation") {
  BenchSpec spec = small_spec(Metric::dtct, Mode::blocking);
  CHECK(throws_errc(Errc::invalid_config, [&] { spec.validate(1); }));
  spec.validate(2);
  spec.reps = 29;
  CHECK(throws_errc(Errc::invalid_config, [&] { spec.validate(2); }));
  spec.reps = 30;
  spec.sizes = {8, 4};
  CHECK(throws_errc(Errc::invalid_config, [&] { spec.validate(2); }));
  spec.sizes = {4};
  spec.target = 0;
  CHECK(throws_errc(Errc::invalid_config, [&] { spec.validate(2); }));
  spec.target = 5;
  CHECK(throws_errc(Errc::invalid_config, [&] { spec.validate(2); }));
  auto dtit = small_spec(Metric::dtit, Mode::blocking);
  CHECK(throws_errc(Errc::invalid_config, [&] { dtit.validate(2); }));
  CHECK(throws_errc(Errc::invalid_config,
                    [&] { run_benchmark(support::config(2), dtit); }));
  CHECK(throws_errc(Errc::invalid_config,
                    [&] { run_benchmark(support::config(1), small_spec(Metric::dtct, Mode::blocking)); }));
}

TEST_CASE("summary statistics") {
  const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  const Stats s = summarize(xs);
  CHECK(s.mean == 5.0);
  CHECK(s.std == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-15));
  CHECK(s.n == 8);
  const std::vector<double> one{3.5};
  CHECK(summarize(one).std == 0.0);
  CHECK(summarize(std::vector<double>{}).n == 0);

  Measurement m{Layer::dart, Op::put, Mode::blocking, Metric::dtct, 1000, 500, 40, 100};
  CHECK(m.bandwidth_bytes_per_s() == doctest::Approx(2e9));
  CHECK(m.stderr_ns() == doctest::Approx(4.0));
  CHECK_FALSE(m.noisy());
  m.std_ns = 51;
  CHECK(m.noisy());
}

TEST_CASE("overhead fit on synthetic data recovers c exactly") {
  const auto sizes = pow2_sizes(1, 1 << 10);
  std::mt19937 rng(5);
  std::vector<double> raw_means;
  for (std::size_t i = 0; i < sizes.size(); ++i) raw_means.push_back(200 + rng() % 5000);
  for (double c : {10.0, 100.0, 1000.0, 0.0, -25.0}) {
    std::vector<double> dart_means;
    for (double r : raw_means) dart_means.push_back(r + c);
    const auto fit = fit_overhead(synthetic(Layer::dart, sizes, dart_means, 4, 30),
                                  synthetic(Layer::raw, sizes, raw_means, 3, 30));
    CHECK(fit.c_ns == c);
    CHECK(fit.residual_std_ns == 0.0);
    CHECK(fit.diff_ns == std::vector<double>(sizes.size(), c));
    // Each size has stderr 5/sqrt(30); c's stderr pools them over k sizes.
    const double se = 5.0 / std::sqrt(30.0);
    CHECK(fit.c_stderr_ns == doctest::Approx(se / std::sqrt(double(sizes.size()))));
    CHECK(fit.consistent_with_zero == (std::abs(c) < 2 * fit.c_stderr_ns));
    CHECK(fit.paired_violations.empty() == (c >= -2 * se));
  }
  CHECK(throws_errc(Errc::invalid_argument, [&] {
    fit_overhead(synthetic(Layer::dart, {1, 2}, {1, 2}, 0, 30),
                 synthetic(Layer::raw, {1, 4}, {1, 2}, 0, 30));
  }));
  CHECK(throws_errc(Errc::invalid_argument, [&] {
    fit_overhead(synthetic(Layer::dart, {1, 2}, {1, 2}, 0, 30),
                 synthetic(Layer::raw, {1}, {1}, 0, 30));
  }));
}

TEST_CASE("constant fake clock gives exact statistics for every metric") {
  struct Case {
    Metric metric;
    Mode mode;
    double per_sample;  // clock step divided by ops per sample
  };
  for (const Case& c : {Case{Metric::dtct, Mode::blocking, 1000.0 / 16},
                        Case{Metric::dtct, Mode::nonblocking, 1000.0 / 16},
                        Case{Metric::dtit, Mode::nonblocking, 1000.0},
                        Case{Metric::bw, Mode::nonblocking, 1000.0 / 64},
                        Case{Metric::bw, Mode::blocking, 1000.0}}) {
    std::int64_t now = 0;
    Clock clock = [&now] { return now += 1000; };
    const auto res = run_benchmark(support::config(2), small_spec(c.metric, c.mode), clock);
    REQUIRE(res.dart.size() == 3);
    for (const auto* series : {&res.dart, &res.raw}) {
      for (const auto& m : *series) {
        CHECK(m.mean_ns == c.per_sample);
        CHECK(m.std_ns == 0.0);
        CHECK(m.samples == 30);
        CHECK(m.metric == c.metric);
      }
    }
    CHECK(res.fit.c_ns == 0.0);
    if (c.metric == Metric::bw && c.mode == Mode::blocking) {
      // W = 1: bandwidth is m over the completion time.
      CHECK(res.dart[2].bandwidth_bytes_per_s() == doctest::Approx(64 / 1e-6));
    }
  }
}

TEST_CASE("varying fake clock matches a replayed oracle") {
  // Call k returns 5*k^2, so DTIT sample s (calls 2s, 2s+1) is 5*(4s+1).
  std::int64_t k = 0;
  Clock clock = [&k] {
    const std::int64_t v = 5 * k * k;
    ++k;
    return v;
  };
  const auto spec = small_spec(Metric::dtit, Mode::nonblocking);
  const auto res = run_benchmark(support::config(3), spec, clock);
  const std::size_t per_size = 2 * (spec.warmup + spec.reps);
  for (std::size_t j = 0; j < spec.sizes.size(); ++j) {
    for (int layer = 0; layer < 2; ++layer) {
      std::vector<double> xs;
      for (std::size_t r = 0; r < spec.reps; ++r) {
        const double s = static_cast<double>(j * per_size + 2 * spec.warmup + 2 * r + layer);
        xs.push_back(5 * (4 * s + 1));
      }
      const auto [mean, sd] = oracle_stats(xs);
      const auto& m = layer == 0 ? res.dart[j] : res.raw[j];
      CHECK(m.mean_ns == doctest::Approx(mean).epsilon(1e-12));
      CHECK(m.std_ns == doctest::Approx(sd).epsilon(1e-12));
    }
    // Raw samples sit one slot later, so dart - raw is exactly -20 ns.
    CHECK(res.fit.diff_ns[j] == doctest::Approx(-20.0));
  }
}

TEST_CASE("CSV report: schema, determinism, round trip, io errors") {
  std::int64_t now = 0;
  Clock clock = [&now] { return now += 777; };
  auto spec = small_spec(Metric::bw, Mode::nonblocking);
  spec.op = Op::get;
  const Result res = run_benchmark(support::config(2), spec, clock);
  const auto path = temp_file("report.csv");
  emit_report(std::span(&res, 1), path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "layer,op,mode,metric,msg_bytes,mean_ns,std_ns,samples");
  const Series back = load_csv(path.string());
  CHECK(back.size() == spec.sizes.size() * 2);
  for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
    CHECK(back[2 * i] == res.dart[i]);
    CHECK(back[2 * i + 1] == res.raw[i]);
  }
  const std::string first = to_csv(std::span(&res, 1));
  CHECK(to_csv(std::span(&res, 1)) == first);
  emit_report(std::span(&res, 1), path.string());
  std::stringstream again;
  again << std::ifstream(path).rdbuf();
  CHECK(again.str() == first);
  CHECK(std::filesystem::exists(path.string() + ".fit.txt"));
  const auto summary = fit_summary(std::span(&res, 1));
  CHECK(summary.find("verdict:") != std::string::npos);

  CHECK(throws_errc(Errc::io_error, [&] {
    emit_report(std::span(&res, 1), "/nonexistent-dir/x/report.csv");
  }));
  CHECK(throws_errc(Errc::io_error, [] { load_csv("/nonexistent-dir/none.csv"); }));
  CHECK(throws_errc(Errc::invalid_argument, [] { parse_csv("wrong,header\n"); }));
  CHECK(throws_errc(Errc::invalid_argument, [] {
    parse_csv("layer,op,mode,metric,msg_bytes,mean_ns,std_ns,samples\ndart,put,blocking,dtct,1,x,0,30\n");
  }));
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".fit.txt");
}

TEST_CASE("shortest round-trip formatting of awkward doubles") {
  Result r;
  const double awkward[] = {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, 5e-324};
  for (double v : awkward) {
    r.dart.push_back(Measurement{Layer::dart, Op::put, Mode::blocking, Metric::dtct, 1, v, v, 30});
    r.raw.push_back(Measurement{Layer::raw, Op::put, Mode::blocking, Metric::dtct, 1, v, 0, 30});
  }
  const Series back = parse_csv(to_csv(std::span(&r, 1)));
  REQUIRE(back.size() == 10);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[2 * i] == r.dart[i]);
    CHECK(back[2 * i + 1] == r.raw[i]);
  }
}

TEST_CASE("real run: report is internally consistent and drains every handle") {
  for (Metric metric : {Metric::dtct, Metric::dtit, Metric::bw}) {
    auto spec = small_spec(metric, Mode::nonblocking);
    spec.sizes = pow2_sizes(1, 4096);
    const Result res = run_benchmark(support::config(2), spec);
    REQUIRE(res.dart.size() == spec.sizes.size());
    double sum = 0;
    for (std::size_t i = 0; i < res.fit.diff_ns.size(); ++i) {
      CHECK(res.fit.diff_ns[i] == res.dart[i].mean_ns - res.raw[i].mean_ns);
      CHECK(res.dart[i].std_ns >= 0);
      sum += res.fit.diff_ns[i];
    }
    CHECK(res.fit.c_ns == doctest::Approx(sum / res.fit.diff_ns.size()).epsilon(1e-12));
    CHECK(res.fit.consistent_with_zero == (std::abs(res.fit.c_ns) < 2 * res.fit.c_stderr_ns));
  }
}

TEST_CASE("paired sanity: dart is not faster than raw beyond noise") {
  // Timing-based; retried because a loaded machine can skew a single run.
  auto spec = small_spec(Metric::dtct, Mode::blocking);
  spec.sizes = {1, 64, 1024};
  spec.reps = 60;
  bool ok = false;
  for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
    ok = run_benchmark(support::config(2), spec).fit.paired_violations.empty();
  }
  CHECK(ok);
}

TEST_CASE("DTIT is size-insensitive at small sizes") {
  // Over 200 calibration runs the ratio ranged from 0.43 to 2.06.
  constexpr double kBound = 4.0;
  auto spec = small_spec(Metric::dtit, Mode::nonblocking);
  spec.sizes = {1, 1024};
  spec.reps = 100;
  bool ok = false;
  for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
    const auto res = run_benchmark(support::config(2), spec);
    const double ratio = res.dart[0].mean_ns / res.dart[1].mean_ns;
    ok = ratio < kBound && ratio > 1.0 / kBound;
  }
  CHECK(ok);
}
