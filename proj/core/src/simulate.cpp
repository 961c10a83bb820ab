#include "posbias/simulate.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "posbias/rng.hpp"

namespace posbias {

void BiasProfile::validate() const {
  if (hit_rate.size() < 2) throw std::invalid_argument("bias profile needs at least 2 positions");
  for (double h : hit_rate) {
    if (!(h >= 0.0 && h <= 1.0)) throw std::invalid_argument("bias profile hit rates must lie in [0, 1]");
  }
  if (fallback.size() != hit_rate.size()) {
    throw std::invalid_argument("bias profile fallback must have one weight per position");
  }
  for (double f : fallback) {
    if (!(f >= 0.0)) throw std::invalid_argument("bias profile fallback weights must be non-negative");
  }
  const double sum = std::accumulate(fallback.begin(), fallback.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("bias profile fallback must sum to 1");
}

BiasProfile BiasProfile::perfect(std::size_t m) {
  return {std::vector<double>(m, 1.0), std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

BiasProfile BiasProfile::always_first(std::size_t m) {
  BiasProfile p{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  p.hit_rate[0] = 1.0;
  p.fallback[0] = 1.0;
  return p;
}

BiasProfile BiasProfile::with_uniform_fallback(std::vector<double> hit_rate) {
  const auto m = hit_rate.size();
  return {std::move(hit_rate), std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

std::size_t bias_position(const ProbeItem &variant) {
  switch (variant.mode) {
    case ProbeMode::video_placement: {
      const auto &v = *variant.video;
      if (v.key_range.first == 0) return 1;
      if (v.key_range.first + v.key_range.length == v.frames.size()) return 3;
      return 2;
    }
    case ProbeMode::rag_placement:
      return variant.rag->relevant_position;
    default:
      return variant.correct_index;
  }
}

std::size_t bias_axis_size(const ProbeItem &variant) {
  switch (variant.mode) {
    case ProbeMode::video_placement:
      return 3;
    case ProbeMode::rag_placement:
      return variant.rag->images.size();
    default:
      return variant.slots.size();
  }
}

std::size_t simulate_pick(const ProbeItem &variant, const BiasProfile &profile, std::uint64_t run_seed,
                          std::string_view variant_key) {
  const auto axis = bias_axis_size(variant);
  if (profile.option_count() != axis) {
    throw std::invalid_argument("bias profile has " + std::to_string(profile.option_count()) +
                                " positions but probe '" + variant.id + "' needs " + std::to_string(axis));
  }
  Stream stream(run_seed, variant_key);
  const auto pos = bias_position(variant);
  if (stream.uniform() < profile.hit_rate[pos - 1]) return variant.correct_index;

  const auto m = variant.slots.size();
  std::vector<double> weights(m, 0.0);
  const bool use_fallback = profile.fallback.size() == m;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i + 1 == variant.correct_index) continue;
    weights[i] = use_fallback ? profile.fallback[i] : 1.0;
    total += weights[i];
  }
  if (!(total > 0.0)) {
    for (std::size_t i = 0; i < m; ++i) weights[i] = (i + 1 == variant.correct_index) ? 0.0 : 1.0;
  }
  return stream.weighted(weights) + 1;
}

std::string simulate_response(const ProbeItem &variant, const BiasProfile &profile, std::uint64_t run_seed,
                              std::string_view variant_key) {
  return variant.slots[simulate_pick(variant, profile, run_seed, variant_key) - 1].label;
}

}  // namespace posbias
