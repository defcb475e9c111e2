#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include "dart/error.hpp"
#include "dart/runtime.hpp"

namespace support {

inline dart::RuntimeConfig config(std::uint32_t units, std::size_t pool = std::size_t{1} << 20) {
  dart::RuntimeConfig cfg;
  cfg.unit_count = units;
  cfg.local_pool_bytes = pool;
  cfg.team_pool_bytes = pool;
  cfg.timeout = std::chrono::seconds(60);
  return cfg;
}

/// Runs `body` between init and exit on every unit.
template <typename F>
dart::LaunchResult spmd(const dart::RuntimeConfig& cfg, F&& body) {
  return dart::launch(cfg, [&](dart::Unit& u) {
    u.init();
    const int status = body(u);
    u.exit();
    return status;
  });
}

template <typename F>
dart::LaunchResult spmd(std::uint32_t units, F&& body) {
  return spmd(config(units), std::forward<F>(body));
}

/// Thread-safe failure log for checks made on unit threads.
class Failures {
 public:
  void check(bool ok, const std::string& what) {
    if (ok) return;
    std::lock_guard lk(mu_);
    items_.push_back(what);
  }
  bool empty() const {
    std::lock_guard lk(mu_);
    return items_.empty();
  }
  std::string str() const {
    std::lock_guard lk(mu_);
    std::string out;
    for (const auto& s : items_) out += s + "\n";
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> items_;
};

template <typename F>
bool throws_errc(dart::Errc code, F&& fn) {
  try {
    fn();
  } catch (const dart::Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace support
