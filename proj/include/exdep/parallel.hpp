#pragma once

#include "exdep/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace exdep {

/// Neumaier compensated accumulator. Partial sums combine in a fixed order,
/// which keeps reductions reproducible across worker counts.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Runs `fn(chunk)` for chunk in [0, n_chunks) on up to `exec.threads`
/// workers. Chunks are claimed dynamically; callers write into per-chunk slots
/// and merge afterwards in chunk order.
template <class Fn>
void for_each_chunk(std::size_t n_chunks, const Exec& exec, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, exec.threads), std::max<std::size_t>(n_chunks, 1));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < n_chunks; c = next++) {
        try {
          fn(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n_chunks;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct ChunkRange {
  std::size_t begin;
  std::size_t end;
};

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

inline ChunkRange chunk_range(std::size_t chunk, std::size_t n, std::size_t chunk_size) {
  const std::size_t b = chunk * chunk_size;
  return {b, std::min(n, b + chunk_size)};
}

}  // namespace exdep
