#pragma once

// Core scalar/dense-vector aliases, error types, and the deterministic random
// stream used across the library.  All stochastic behavior in the library is
// reproducible from a single root seed via named substreams.

#include <Eigen/Dense>

#include <atomic>
#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace stephint {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Invalid input that a caller could have checked (bad dimensions, bad key,
// out-of-range hyperparameter).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed request that cannot be satisfied by the data it was given
// (infeasible partition, malformed record, unreadable file).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- seed derivation ------------------------------------------------------

// splitmix64 finalizer; fixed constants, stable across platforms.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent substream seed from a root seed, a stream name, and
// an index.  Distinct (name, index) pairs give statistically independent
// streams, so workers can draw in parallel without sharing RNG state.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a over the stream name
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return mix64(mix64(root ^ h) + index);
}

// ---- random stream --------------------------------------------------------

// Deterministic random stream.  Wraps mt19937_64 but performs all value
// mapping itself (std::uniform_*_distribution output is not pinned by the
// standard and varies across library implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  Scalar uniform01() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); unbiased via masked rejection.
  std::size_t uniform_below(std::size_t n) {
    if (n == 0) throw ConfigError("uniform_below: n must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = ~0ull >> std::countl_zero(static_cast<std::uint64_t>(n - 1));
    std::uint64_t draw;
    do {
      draw = next_u64() & mask;
    } while (draw >= n);
    return static_cast<std::size_t>(draw);
  }

  // Samples an index from an unnormalized non-negative weight vector by CDF
  // inversion.  Deterministic given the stream state.
  Eigen::Index categorical(const Vector& weights) {
    const Scalar total = weights.sum();
    if (!(total > 0) || !std::isfinite(total))
      throw DataError("categorical: weights must have positive finite sum");
    const Scalar u = uniform01() * total;
    Scalar acc = 0;
    Eigen::Index last_positive = -1;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0) continue;
      acc += weights[i];
      last_positive = i;
      if (u < acc) return i;
    }
    return last_positive;  // rounding slack: the draw fell past the summed mass
  }

 private:
  std::mt19937_64 gen_;
};

// ---- deterministic parallel map -------------------------------------------

// Runs fn(i) for i in [0, count) and collects results in index order.  The
// caller must make fn deterministic per index (e.g. seed from derive_seed with
// the index); then the output is identical for any thread count.
template <typename Result, typename Fn>
std::vector<Result> ordered_map(std::size_t count, int threads, Fn&& fn) {
  std::vector<Result> out(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) out[i] = fn(i);
    });
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace stephint
