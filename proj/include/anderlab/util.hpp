// Small shared utilities: deterministic hashing RNG, compensated sums,
// a thread helper for batch runs, and a wall-clock timer.
#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace anderlab {

// SplitMix64 step (Steele et al.); the workhorse behind all seeding here.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stateless counter-style RNG: every draw is a pure function of the key
// material, so sampling order never matters.
class HashRng {
 public:
  explicit HashRng(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL) {
    // burn-in decorrelates trivially related seeds (0,1,2,...)
    splitmix64(state_);
    splitmix64(state_);
  }
  HashRng(std::uint64_t seed, std::int64_t k0, std::int64_t k1 = 0) : HashRng(seed) {
    mix(static_cast<std::uint64_t>(k0) ^ 0x8000000000000000ULL);
    mix(static_cast<std::uint64_t>(k1) ^ 0x4000000000000000ULL);
  }

  void mix(std::uint64_t v) {
    state_ ^= v + 0x9E3779B97F4A7C15ULL + (state_ << 6) + (state_ >> 2);
    splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform on (0,1]: never returns 0, safe under log()
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // standard normal pair via Box-Muller
  std::array<double, 2> next_gaussian_pair() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  double next_gaussian() { return next_gaussian_pair()[0]; }

 private:
  std::uint64_t state_;
};

// Kahan-Neumaier compensated accumulator; used where lattice sums must be
// reproducible to the last bit across refactorings of loop bodies.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Runs fn(i) for i in [0,n) on up to `jobs` threads. Work items must be
// independent; callers aggregate results indexed by i so reduction order
// stays deterministic.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nt = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(jobs)));
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&fn, t, nt, n]() {
      for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(nt)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace anderlab
