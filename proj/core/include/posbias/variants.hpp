#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "posbias/probe.hpp"

namespace posbias {

/// How the correct content is moved into slot k.
///  - swap: exchange the correct slot's content with slot k's content.
///  - rotate: cyclic shift of all contents (circular-evaluation convention).
enum class VariantRule { swap, rotate };

std::string_view to_string(VariantRule rule);
VariantRule variant_rule_from_string(std::string_view name);

/// The M position variants of one probe. Variant k (1-based) has its correct
/// content in slot k.
struct VariantSet {
  std::string parent_id;
  std::vector<ProbeItem> variants;
  std::vector<std::size_t> placement_of_correct;
};

ProbeItem swap_to(const ProbeItem &item, std::size_t position);
ProbeItem rotate_to(const ProbeItem &item, std::size_t position);
VariantSet swap_variants(const ProbeItem &item, VariantRule rule = VariantRule::swap);

/// A permutation of demonstration positions. permutation[j] is the 1-based
/// input index placed at output position j; rank is its lexicographic index.
struct Ordering {
  std::vector<std::size_t> permutation;
  std::uint64_t rank = 0;

  [[nodiscard]] std::size_t size() const { return permutation.size(); }
  bool operator==(const Ordering &) const = default;
};

inline constexpr std::size_t kDefaultOrderingCap = 8;

/// All n! orderings in lexicographic order. Throws std::invalid_argument when
/// n is 0 or above `cap` (raise the cap explicitly for larger sweeps).
std::vector<Ordering> enumerate_orderings(std::size_t n, std::size_t cap = kDefaultOrderingCap);

/// Lexicographic rank of a 1-based permutation (Lehmer code).
std::uint64_t ordering_rank(std::span<const std::size_t> permutation);
Ordering inverse(const Ordering &ordering);

template <typename T>
std::vector<T> apply_ordering(std::span<const T> items, const Ordering &ordering) {
  if (items.size() != ordering.size()) {
    throw std::invalid_argument("apply_ordering: " + std::to_string(items.size()) + " items for an ordering of " +
                                std::to_string(ordering.size()));
  }
  std::vector<T> out;
  out.reserve(items.size());
  for (auto source : ordering.permutation) out.push_back(items[source - 1]);
  return out;
}

template <typename T>
std::vector<T> apply_ordering(const std::vector<T> &items, const Ordering &ordering) {
  return apply_ordering(std::span<const T>(items), ordering);
}

enum class KeyframePlacement { front, middle, back };

std::string_view to_string(KeyframePlacement placement);
KeyframePlacement keyframe_placement_from_string(std::string_view name);
inline constexpr KeyframePlacement kAllKeyframePlacements[] = {KeyframePlacement::front, KeyframePlacement::middle,
                                                               KeyframePlacement::back};

/// Moves the key block to offset 0, floor((total - key) / 2) or total - key.
/// Non-key frames keep their relative order.
FrameManifest place_keyframes(const FrameManifest &manifest, KeyframePlacement placement);
ProbeItem place_keyframes(const ProbeItem &video_probe, KeyframePlacement placement);

/// Moves the question-relevant image to 1-based `position` in the RAG set.
ProbeItem place_rag_image(const ProbeItem &rag_probe, std::size_t position);

enum class ImportanceStrategy { begin, end, begin_end };

std::string_view to_string(ImportanceStrategy strategy);
ImportanceStrategy importance_strategy_from_string(std::string_view name);

/// Output order as 0-based input indices. Ties keep their input order.
///  - end: ascending by score, so the most important item is last.
///  - begin: descending, most important first.
///  - begin_end: ranks dealt alternately to the back and front ends
///    (rank 1 last, rank 2 first, rank 3 second-to-last, ...).
std::vector<std::size_t> importance_order(std::span<const double> scores, ImportanceStrategy strategy);

template <typename T>
std::vector<T> reorder_by_importance(std::span<const T> items, std::span<const double> scores,
                                     ImportanceStrategy strategy) {
  if (items.size() != scores.size()) {
    throw std::invalid_argument("reorder_by_importance: " + std::to_string(items.size()) + " items but " +
                                std::to_string(scores.size()) + " scores");
  }
  std::vector<T> out;
  out.reserve(items.size());
  for (auto idx : importance_order(scores, strategy)) out.push_back(items[idx]);
  return out;
}

}  // namespace posbias
