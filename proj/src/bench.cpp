#include "dart/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dart/error.hpp"

namespace dart::bench {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  fail(Errc::invalid_config, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::string_view kOpNames[] = {"put", "get"};
constexpr std::string_view kModeNames[] = {"blocking", "nonblocking"};
constexpr std::string_view kMetricNames[] = {"dtct", "dtit", "bw"};
constexpr std::string_view kLayerNames[] = {"dart", "raw"};

constexpr std::size_t kMaxBytesPerSample = std::size_t{1} << 20;

// The two layers under test. Dart goes through dereference, translation and
// handle wrapping on every call; raw reuses a pre-resolved target.
class Driver {
 public:
  Driver(Unit& unit, const BenchSpec& spec, GlobalPtr remote, std::span<std::byte> buf)
      : unit_(unit), spec_(spec), remote_(remote), buf_(buf),
        target_(unit.dereference(remote)) {}

  void blocking(Layer layer, std::size_t m) {
    if (layer == Layer::dart) {
      if (spec_.op == Op::put) {
        unit_.put_blocking(remote_, buf_.first(m));
      } else {
        unit_.get_blocking(buf_.first(m), remote_);
      }
    } else {
      auto& ep = unit_.endpoint();
      ep.wait(issue_raw(m));
    }
  }

  void completion(Layer layer, std::size_t m) {
    if (spec_.mode == Mode::blocking) {
      blocking(layer, m);
    } else if (layer == Layer::dart) {
      Handle h = issue_dart(m);
      unit_.wait(h);
    } else {
      unit_.endpoint().wait(issue_raw(m));
    }
  }

  Handle issue_dart(std::size_t m) {
    return spec_.op == Op::put ? unit_.put(remote_, buf_.first(m))
                               : unit_.get(buf_.first(m), remote_);
  }

  transport::Request issue_raw(std::size_t m) {
    auto& ep = unit_.endpoint();
    return spec_.op == Op::put
               ? ep.put_nb(target_.region, target_.rank, target_.disp, buf_.first(m))
               : ep.get_nb(target_.region, target_.rank, target_.disp, buf_.first(m));
  }

  Unit& unit() { return unit_; }

 private:
  Unit& unit_;
  const BenchSpec& spec_;
  GlobalPtr remote_;
  std::span<std::byte> buf_;
  Target target_;
};

Measurement make_measurement(const BenchSpec& spec, Layer layer, std::size_t m,
                             const std::vector<double>& samples) {
  const Stats s = summarize(samples);
  return Measurement{layer, spec.op, spec.mode, spec.metric, m, s.mean, s.std, s.n};
}

std::size_t batch_for(const BenchSpec& spec, std::size_t m) {
  return std::clamp<std::size_t>(kMaxBytesPerSample / std::max<std::size_t>(m, 1), 1,
                                 std::max<std::size_t>(spec.batch, 1));
}

// Shared scaffolding: allocate on the team of all units, run `sample` for each
// size and layer at the origin, everyone else waits at the barrier.
template <typename SampleFn>
Result run_pairs(Unit& unit, const BenchSpec& spec, SampleFn&& sample) {
  spec.validate(unit.size());
  const std::size_t max_m = *std::max_element(spec.sizes.begin(), spec.sizes.end());
  const GlobalPtr mem = unit.team_memalloc_aligned(kTeamAll, max_m);
  Result result;
  if (unit.myid() == spec.origin) {
    std::vector<std::byte> buf(max_m, std::byte{0x5a});
    Driver driver(unit, spec, mem.with_unit(spec.target), buf);
    std::vector<double> dart_samples, raw_samples;
    for (std::size_t m : spec.sizes) {
      dart_samples.clear();
      raw_samples.clear();
      for (std::size_t i = 0; i < spec.warmup; ++i) {
        sample(driver, Layer::dart, m);
        sample(driver, Layer::raw, m);
      }
      // Alternate layers so drift hits both equally.
      for (std::size_t r = 0; r < spec.reps; ++r) {
        dart_samples.push_back(sample(driver, Layer::dart, m));
        raw_samples.push_back(sample(driver, Layer::raw, m));
      }
      result.dart.push_back(make_measurement(spec, Layer::dart, m, dart_samples));
      result.raw.push_back(make_measurement(spec, Layer::raw, m, raw_samples));
    }
    result.fit = fit_overhead(result.dart, result.raw);
  }
  unit.barrier(kTeamAll);
  unit.team_memfree(kTeamAll, mem);
  return result;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(Op v) { return kOpNames[static_cast<int>(v)]; }
std::string_view to_string(Mode v) { return kModeNames[static_cast<int>(v)]; }
std::string_view to_string(Metric v) { return kMetricNames[static_cast<int>(v)]; }
std::string_view to_string(Layer v) { return kLayerNames[static_cast<int>(v)]; }
Op parse_op(std::string_view s) { return parse_enum<Op>(s, kOpNames, "op"); }
Mode parse_mode(std::string_view s) { return parse_enum<Mode>(s, kModeNames, "mode"); }
Metric parse_metric(std::string_view s) {
  return parse_enum<Metric>(s, kMetricNames, "metric");
}
Layer parse_layer(std::string_view s) { return parse_enum<Layer>(s, kLayerNames, "layer"); }

std::int64_t steady_clock_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<std::size_t> pow2_sizes(std::size_t min_bytes, std::size_t max_bytes) {
  std::vector<std::size_t> out;
  std::size_t m = 1;
  while (m < min_bytes) m <<= 1;
  for (; m <= max_bytes && m != 0; m <<= 1) out.push_back(m);
  return out;
}

void BenchSpec::validate(std::uint32_t unit_count) const {
  if (unit_count < 2) fail(Errc::invalid_config, "benchmarks need at least 2 units");
  if (origin >= unit_count || target >= unit_count) {
    fail(Errc::invalid_config, "benchmark pair out of range");
  }
  if (origin == target) fail(Errc::invalid_config, "benchmark pair must be two units");
  if (sizes.empty()) fail(Errc::invalid_config, "no message sizes");
  if (!std::is_sorted(sizes.begin(), sizes.end()) || sizes.front() == 0) {
    fail(Errc::invalid_config, "message sizes must be positive and ascending");
  }
  if (reps < 30) fail(Errc::invalid_config, "at least 30 repetitions are required");
  if (window == 0) fail(Errc::invalid_config, "window must be >= 1");
  if (metric == Metric::dtit && mode == Mode::blocking) {
    fail(Errc::invalid_config, "initiation time is defined for non-blocking ops only");
  }
}

Stats summarize(std::span<const double> samples) {
  Stats s;
  s.n = samples.size();
  if (s.n == 0) return s;
  double sum = 0;
  for (double x : samples) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double sq = 0;
  for (double x : samples) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(s.n - 1));
  return s;
}

double Measurement::bandwidth_bytes_per_s() const {
  return mean_ns > 0 ? static_cast<double>(msg_bytes) / (mean_ns * 1e-9) : 0.0;
}

double Measurement::stderr_ns() const {
  return samples > 0 ? std_ns / std::sqrt(static_cast<double>(samples)) : 0.0;
}

bool Measurement::noisy() const { return mean_ns > 0 && std_ns / mean_ns > 0.10; }

OverheadFit fit_overhead(const Series& dart, const Series& raw) {
  if (dart.size() != raw.size() || dart.empty()) {
    fail(Errc::invalid_argument, "overhead fit needs matching, non-empty size grids");
  }
  OverheadFit fit;
  double var_sum = 0;
  for (std::size_t i = 0; i < dart.size(); ++i) {
    if (dart[i].msg_bytes != raw[i].msg_bytes) {
      fail(Errc::invalid_argument, "overhead fit size grids differ");
    }
    const double se2 = dart[i].stderr_ns() * dart[i].stderr_ns() +
                       raw[i].stderr_ns() * raw[i].stderr_ns();
    const double d = dart[i].mean_ns - raw[i].mean_ns;
    fit.sizes.push_back(dart[i].msg_bytes);
    fit.diff_ns.push_back(d);
    fit.diff_stderr_ns.push_back(std::sqrt(se2));
    if (d < -2.0 * std::sqrt(se2)) fit.paired_violations.push_back(dart[i].msg_bytes);
    var_sum += se2;
  }
  const Stats s = summarize(fit.diff_ns);
  const auto k = static_cast<double>(fit.diff_ns.size());
  fit.c_ns = s.mean;
  fit.residual_std_ns = s.std;
  fit.c_stderr_ns = std::sqrt(var_sum) / k;
  fit.consistent_with_zero = std::abs(fit.c_ns) < 2.0 * fit.c_stderr_ns;
  return fit;
}

Result measure_dtct(Unit& unit, const BenchSpec& spec, const Clock& clock) {
  if (spec.metric != Metric::dtct) fail(Errc::invalid_config, "spec metric is not dtct");
  return run_pairs(unit, spec, [&](Driver& d, Layer layer, std::size_t m) {
    const std::size_t batch = batch_for(spec, m);
    const std::int64_t t0 = clock();
    for (std::size_t b = 0; b < batch; ++b) d.completion(layer, m);
    const std::int64_t t1 = clock();
    return static_cast<double>(t1 - t0) / static_cast<double>(batch);
  });
}

Result measure_dtit(Unit& unit, const BenchSpec& spec, const Clock& clock) {
  if (spec.metric != Metric::dtit) fail(Errc::invalid_config, "spec metric is not dtit");
  return run_pairs(unit, spec, [&](Driver& d, Layer layer, std::size_t m) {
    double elapsed;
    if (layer == Layer::dart) {
      const std::int64_t t0 = clock();
      Handle h = d.issue_dart(m);
      const std::int64_t t1 = clock();
      d.unit().wait(h);
      elapsed = static_cast<double>(t1 - t0);
    } else {
      const std::int64_t t0 = clock();
      auto req = d.issue_raw(m);
      const std::int64_t t1 = clock();
      d.unit().endpoint().wait(req);
      elapsed = static_cast<double>(t1 - t0);
    }
    return elapsed;
  });
}

Result measure_bandwidth(Unit& unit, const BenchSpec& spec, const Clock& clock) {
  if (spec.metric != Metric::bw) fail(Errc::invalid_config, "spec metric is not bw");
  const std::size_t w = spec.mode == Mode::blocking ? 1 : spec.window;
  std::vector<Handle> handles;
  std::vector<transport::Request> reqs;
  return run_pairs(unit, spec, [&](Driver& d, Layer layer, std::size_t m) {
    const std::int64_t t0 = clock();
    if (spec.mode == Mode::blocking) {
      d.blocking(layer, m);
    } else if (layer == Layer::dart) {
      handles.clear();
      for (std::size_t i = 0; i < w; ++i) handles.push_back(d.issue_dart(m));
      d.unit().waitall(handles);
    } else {
      reqs.clear();
      for (std::size_t i = 0; i < w; ++i) reqs.push_back(d.issue_raw(m));
      d.unit().endpoint().wait(reqs);
    }
    const std::int64_t t1 = clock();
    return static_cast<double>(t1 - t0) / static_cast<double>(w);
  });
}

Result measure(Unit& unit, const BenchSpec& spec, const Clock& clock) {
  switch (spec.metric) {
    case Metric::dtct: return measure_dtct(unit, spec, clock);
    case Metric::dtit: return measure_dtit(unit, spec, clock);
    case Metric::bw: return measure_bandwidth(unit, spec, clock);
  }
  fail(Errc::invalid_config, "unknown metric");
}

Result run_benchmark(const RuntimeConfig& config, const BenchSpec& spec,
                     const Clock& clock) {
  spec.validate(config.unit_count);
  Result out;
  auto run = launch(config, [&](Unit& unit) {
    unit.init();
    Result r = measure(unit, spec, clock);
    if (unit.myid() == spec.origin) out = std::move(r);
    unit.exit();
    return 0;
  });
  if (!run.ok()) fail(Errc::invalid_state, "benchmark run failed:\n" + run.report());
  return out;
}

std::string to_csv(std::span<const Result> results) {
  std::string out(kCsvHeader);
  out += "\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.dart.size(); ++i) {
      for (const Measurement* m : {&r.dart[i], &r.raw[i]}) {
        out += to_string(m->layer);
        out += ',';
        out += to_string(m->op);
        out += ',';
        out += to_string(m->mode);
        out += ',';
        out += to_string(m->metric);
        out += ',';
        out += std::to_string(m->msg_bytes);
        out += ',';
        out += format_double(m->mean_ns);
        out += ',';
        out += format_double(m->std_ns);
        out += ',';
        out += std::to_string(m->samples);
        out += '\n';
      }
    }
  }
  return out;
}

std::string fit_summary(std::span<const Result> results) {
  std::ostringstream os;
  for (const auto& r : results) {
    if (r.dart.empty()) continue;
    const auto& head = r.dart.front();
    const auto& f = r.fit;
    os << to_string(head.op) << " " << to_string(head.mode) << " "
       << to_string(head.metric) << "\n";
    os << "  size_bytes  dart_ns  raw_ns  diff_ns  diff_stderr_ns  noisy\n";
    for (std::size_t i = 0; i < f.sizes.size(); ++i) {
      os << "  " << f.sizes[i] << "  " << format_double(r.dart[i].mean_ns) << "  "
         << format_double(r.raw[i].mean_ns) << "  " << format_double(f.diff_ns[i])
         << "  " << format_double(f.diff_stderr_ns[i]) << "  "
         << ((r.dart[i].noisy() || r.raw[i].noisy()) ? "yes" : "no") << "\n";
    }
    os << "  constant overhead c = " << format_double(f.c_ns) << " ns +- "
       << format_double(f.c_stderr_ns) << " ns (residual spread "
       << format_double(f.residual_std_ns) << " ns)\n";
    os << "  verdict: "
       << (f.consistent_with_zero ? "consistent with zero" : "significant") << "\n";
    if (!f.paired_violations.empty()) {
      os << "  dart below raw by more than 2 stderr at sizes:";
      for (auto s : f.paired_violations) os << " " << s;
      os << "\n";
    }
  }
  return os.str();
}

void emit_report(std::span<const Result> results, const std::string& path) {
  auto write = [](const std::string& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_error, "cannot open " + p + " for writing");
    out << text;
    out.flush();
    if (!out) fail(Errc::io_error, "write to " + p + " failed");
  };
  write(path, to_csv(results));
  write(path + ".fit.txt", fit_summary(results));
}

Series parse_csv(std::string_view text) {
  auto next_line = [&text]() -> std::string_view {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    return line;
  };
  if (next_line() != kCsvHeader) fail(Errc::invalid_argument, "unexpected CSV header");

  Series out;
  while (!text.empty()) {
    std::string_view line = next_line();
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cols.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols.size() != 8) fail(Errc::invalid_argument, "CSV row needs 8 columns");
    auto num = [](std::string_view s, auto& v) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(Errc::invalid_argument, "bad CSV number '" + std::string(s) + "'");
      }
    };
    Measurement m;
    m.layer = parse_layer(cols[0]);
    m.op = parse_op(cols[1]);
    m.mode = parse_mode(cols[2]);
    m.metric = parse_metric(cols[3]);
    num(cols[4], m.msg_bytes);
    num(cols[5], m.mean_ns);
    num(cols[6], m.std_ns);
    num(cols[7], m.samples);
    out.push_back(m);
  }
  return out;
}

Series load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace dart::bench
