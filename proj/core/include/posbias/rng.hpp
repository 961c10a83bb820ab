#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace posbias {

/// Derives an independent 64-bit stream seed from a run seed and a key
/// (item id, variant id). Stable across platforms and releases.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view key);

/// Seeded generator whose draws are bit-identical on every platform.
///
/// std::mt19937_64 output is fully specified by the standard; the standard
/// distributions are not, so the conversions below are done by hand.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t run_seed, std::string_view key) : engine_(derive_seed(run_seed, key)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform();

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Index drawn proportionally to non-negative weights (at least one > 0).
  std::size_t weighted(const std::vector<double> &weights);

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace posbias
