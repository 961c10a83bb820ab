#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posbias/probe.hpp"

namespace posbias {

/// Parameters of the simulated model.
///
/// hit_rate[i] is the chance of answering correctly when the probe's bias
/// position is i+1. On a miss the pick is drawn from `fallback` restricted to
/// the incorrect slots (renormalized; uniform if the restriction is all zero
/// or the fallback length differs from the slot count).
///
/// With order_sensitive set, demonstration orderings get independent draws;
/// otherwise an ordering sweep sees the same answer under every ordering.
struct BiasProfile {
  std::vector<double> hit_rate;
  std::vector<double> fallback;
  bool order_sensitive = false;

  [[nodiscard]] std::size_t option_count() const { return hit_rate.size(); }

  /// Throws std::invalid_argument on rates outside [0, 1], a fallback that
  /// does not sum to 1 or whose length differs from hit_rate.
  void validate() const;

  static BiasProfile perfect(std::size_t m);
  static BiasProfile always_first(std::size_t m);
  static BiasProfile with_uniform_fallback(std::vector<double> hit_rate);
};

/// The position a probe's bias is indexed by: the correct slot for
/// multiple-choice probes, the key-frame placement (front = 1, middle = 2,
/// back = 3) for video probes, the relevant image's position for RAG probes.
std::size_t bias_position(const ProbeItem &variant);
/// Number of bias positions for the probe's mode.
std::size_t bias_axis_size(const ProbeItem &variant);

/// Deterministic simulated answer for one trial. Fully determined by
/// (profile, run_seed, variant_key); returns the picked slot's label.
std::string simulate_response(const ProbeItem &variant, const BiasProfile &profile, std::uint64_t run_seed,
                              std::string_view variant_key);

/// 1-based slot index picked by the simulator (same draw as simulate_response).
std::size_t simulate_pick(const ProbeItem &variant, const BiasProfile &profile, std::uint64_t run_seed,
                          std::string_view variant_key);

}  // namespace posbias
