#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dart/gptr.hpp"
#include "dart/runtime.hpp"

namespace dart::bench {

enum class Op { put, get };
enum class Mode { blocking, nonblocking };
enum class Metric { dtct, dtit, bw };
enum class Layer { dart, raw };

std::string_view to_string(Op v);
std::string_view to_string(Mode v);
std::string_view to_string(Metric v);
std::string_view to_string(Layer v);
Op parse_op(std::string_view s);
Mode parse_mode(std::string_view s);
Metric parse_metric(std::string_view s);
Layer parse_layer(std::string_view s);

/// Monotonic nanoseconds. Injectable so statistics can be checked exactly.
using Clock = std::function<std::int64_t()>;
std::int64_t steady_clock_ns();

/// Powers of two from min to max inclusive (min rounded up to a power of two).
std::vector<std::size_t> pow2_sizes(std::size_t min_bytes, std::size_t max_bytes);

inline constexpr std::size_t kDefaultMaxSize = std::size_t{1} << 21;

struct BenchSpec {
  Op op = Op::put;
  Mode mode = Mode::blocking;
  Metric metric = Metric::dtct;
  std::vector<std::size_t> sizes = pow2_sizes(1, kDefaultMaxSize);
  std::size_t reps = 30;
  std::size_t warmup = 5;
  /// Ops per timed sample for completion-time metrics (capped so one sample
  /// moves at most ~1 MiB).
  std::size_t batch = 16;
  /// Overlapping ops per bandwidth sample.
  std::size_t window = 64;
  UnitId origin = 0;
  UnitId target = 1;

  void validate(std::uint32_t unit_count) const;
};

struct Stats {
  double mean = 0;
  double std = 0;  // sample standard deviation (n-1); 0 for n < 2
  std::size_t n = 0;
};

Stats summarize(std::span<const double> samples);

struct Measurement {
  Layer layer = Layer::dart;
  Op op = Op::put;
  Mode mode = Mode::blocking;
  Metric metric = Metric::dtct;
  std::size_t msg_bytes = 0;
  double mean_ns = 0;
  double std_ns = 0;
  std::size_t samples = 0;

  double bandwidth_bytes_per_s() const;
  double stderr_ns() const;
  /// Relative standard deviation above 10%.
  bool noisy() const;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

using Series = std::vector<Measurement>;

/// Constant-overhead model t_dart(m) - t_raw(m) = c.
struct OverheadFit {
  std::vector<std::size_t> sizes;
  std::vector<double> diff_ns;        // per-size t_dart - t_raw
  std::vector<double> diff_stderr_ns; // per-size paired standard error
  double c_ns = 0;                    // mean of diff_ns
  double residual_std_ns = 0;         // spread of diff_ns around c
  double c_stderr_ns = 0;
  bool consistent_with_zero = false;  // |c| < 2 * c_stderr
  /// Sizes where the difference falls below -2 standard errors.
  std::vector<std::size_t> paired_violations;
};

/// Throws Errc::invalid_argument if the size grids differ.
OverheadFit fit_overhead(const Series& dart, const Series& raw);

struct Result {
  Series dart;
  Series raw;
  OverheadFit fit;
};

// Called by every unit inside a launch; the origin returns the measurements,
// every other unit an empty Result. Throws Errc::invalid_config for bad specs.
Result measure_dtct(Unit& unit, const BenchSpec& spec, const Clock& clock = steady_clock_ns);
Result measure_dtit(Unit& unit, const BenchSpec& spec, const Clock& clock = steady_clock_ns);
Result measure_bandwidth(Unit& unit, const BenchSpec& spec,
                         const Clock& clock = steady_clock_ns);
Result measure(Unit& unit, const BenchSpec& spec, const Clock& clock = steady_clock_ns);

/// Launches `config.unit_count` units, runs `measure`, returns the origin's
/// result.
Result run_benchmark(const RuntimeConfig& config, const BenchSpec& spec,
                     const Clock& clock = steady_clock_ns);

inline constexpr std::string_view kCsvHeader =
    "layer,op,mode,metric,msg_bytes,mean_ns,std_ns,samples";

std::string to_csv(std::span<const Result> results);
std::string fit_summary(std::span<const Result> results);
/// Writes the CSV to `path` and the fit summary to `path + ".fit.txt"`.
/// Throws Errc::io_error.
void emit_report(std::span<const Result> results, const std::string& path);
Series parse_csv(std::string_view text);
Series load_csv(const std::string& path);

}  // namespace dart::bench
