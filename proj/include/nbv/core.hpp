#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace nbv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class EmptyMeshError : public std::runtime_error {
 public:
  explicit EmptyMeshError(const std::string& what) : std::runtime_error(what) {}
};

class BehindCameraError : public std::runtime_error {
 public:
  explicit BehindCameraError(const std::string& what) : std::runtime_error(what) {}
};

class UnevaluatedFitnessError : public std::logic_error {
 public:
  explicit UnevaluatedFitnessError(const std::string& what) : std::logic_error(what) {}
};

class PlacementError : public std::runtime_error {
 public:
  explicit PlacementError(const std::string& what) : std::runtime_error(what) {}
};

// Parse failure in a text input; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Small shared utilities
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string_view::npos) return {};
  const std::size_t b = s.find_last_not_of(ws);
  return std::string(s.substr(a, b - a + 1));
}

// Shortest-round-trip-ish formatting; %.17g reproduces the double exactly,
// which keeps exported files byte-identical across runs.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic stream of sub-seeds from a master seed. Stream ids are fixed
// at the call sites, so every component keeps its own independent seed
// regardless of evaluation order.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return detail::splitmix64(master ^ detail::splitmix64(stream + 1));
}

// Static-partition parallel map over [0, n). Each index writes only its own
// output slot, so results are identical to the sequential loop no matter how
// many workers run. Falls back to the plain loop on single-core hosts.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned num_threads = 0) {
  if (num_threads == 0) num_threads = std::thread::hardware_concurrency();
  if (num_threads <= 1 || n < 2 * num_threads) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(num_threads);
  const std::size_t chunk = (n + num_threads - 1) / num_threads;
  for (unsigned t = 0; t < num_threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace nbv
