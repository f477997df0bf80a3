#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace freqtune {

// Base of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (non-finite input,
// zero luminance, empty data set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or corrupt file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink =
      [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline void warn(const std::string& msg) {
  std::lock_guard<std::mutex> lock(detail::warning_mutex());
  detail::warning_sink()(msg);
}

// Replaces the warning sink and returns the previous one.
inline std::function<void(const std::string&)> set_warning_sink(
    std::function<void(const std::string&)> sink) {
  std::lock_guard<std::mutex> lock(detail::warning_mutex());
  return std::exchange(detail::warning_sink(), std::move(sink));
}

/// A C x H x W image in 8-bit display code values. Values are stored as
/// doubles so that intermediate (unclipped) results can live in the same
/// container; only loaders and apply_perturbation guarantee [0, 255].
struct ImageBuffer {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  ImageBuffer() = default;
  ImageBuffer(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  std::size_t size() const { return pixels.size(); }
  std::size_t plane() const { return height * width; }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }

  bool same_shape(const ImageBuffer& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  std::string dims() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Worker count: FREQTUNE_THREADS if set to a positive integer, otherwise the
// hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("FREQTUNE_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
/// worker. fn must only write to state owned by index i; callers reduce the
/// per-index results afterwards in index order, which keeps results
/// independent of the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace freqtune
