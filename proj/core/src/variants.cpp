#include "posbias/variants.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "posbias/error.hpp"

namespace posbias {

std::string_view to_string(VariantRule rule) { return rule == VariantRule::swap ? "swap" : "rotate"; }

VariantRule variant_rule_from_string(std::string_view name) {
  if (name == "swap") return VariantRule::swap;
  if (name == "rotate") return VariantRule::rotate;
  throw std::invalid_argument("unknown variant rule '" + std::string(name) + "'");
}

namespace {

void check_position(const ProbeItem &item, std::size_t position) {
  if (position < 1 || position > item.slots.size()) {
    throw std::invalid_argument("probe '" + item.id + "': target position " + std::to_string(position) +
                                " outside [1, " + std::to_string(item.slots.size()) + "]");
  }
}

}  // namespace

ProbeItem swap_to(const ProbeItem &item, std::size_t position) {
  check_position(item, position);
  ProbeItem out = item;
  // Labels name positions, so only the contents move.
  std::swap(out.slots[item.correct_index - 1].content, out.slots[position - 1].content);
  out.correct_index = position;
  return out;
}

ProbeItem rotate_to(const ProbeItem &item, std::size_t position) {
  check_position(item, position);
  const std::size_t m = item.slots.size();
  const std::size_t shift = (position + m - item.correct_index) % m;
  ProbeItem out = item;
  for (std::size_t j = 0; j < m; ++j) out.slots[(j + shift) % m].content = item.slots[j].content;
  out.correct_index = position;
  return out;
}

VariantSet swap_variants(const ProbeItem &item, VariantRule rule) {
  item.validate();
  VariantSet set;
  set.parent_id = item.id;
  for (std::size_t k = 1; k <= item.slots.size(); ++k) {
    set.variants.push_back(rule == VariantRule::swap ? swap_to(item, k) : rotate_to(item, k));
    set.placement_of_correct.push_back(k);
  }
  return set;
}

std::vector<Ordering> enumerate_orderings(std::size_t n, std::size_t cap) {
  if (n == 0) throw std::invalid_argument("enumerate_orderings: need at least one item");
  if (n > cap) {
    throw std::invalid_argument("enumerate_orderings: " + std::to_string(n) + " items exceed the cap of " +
                                std::to_string(cap) + "; pass a larger cap explicitly to enumerate " +
                                std::to_string(n) + "! orderings");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{1});
  std::vector<Ordering> out;
  std::uint64_t rank = 0;
  do {
    out.push_back({perm, rank++});
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::uint64_t ordering_rank(std::span<const std::size_t> permutation) {
  const std::size_t n = permutation.size();
  std::vector<std::uint64_t> factorial(n + 1, 1);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * i;
  std::vector<bool> used(n + 1, false);
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = permutation[i];
    if (v < 1 || v > n || used[v]) throw std::invalid_argument("ordering_rank: not a permutation of [1, n]");
    std::uint64_t smaller_unused = 0;
    for (std::size_t u = 1; u < v; ++u) smaller_unused += used[u] ? 0 : 1;
    rank += smaller_unused * factorial[n - 1 - i];
    used[v] = true;
  }
  return rank;
}

Ordering inverse(const Ordering &ordering) {
  Ordering inv;
  inv.permutation.resize(ordering.size());
  for (std::size_t j = 0; j < ordering.size(); ++j) inv.permutation[ordering.permutation[j] - 1] = j + 1;
  inv.rank = ordering_rank(inv.permutation);
  return inv;
}

std::string_view to_string(KeyframePlacement placement) {
  switch (placement) {
    case KeyframePlacement::front:
      return "front";
    case KeyframePlacement::middle:
      return "middle";
    case KeyframePlacement::back:
      return "back";
  }
  return "front";
}

KeyframePlacement keyframe_placement_from_string(std::string_view name) {
  if (name == "front") return KeyframePlacement::front;
  if (name == "middle") return KeyframePlacement::middle;
  if (name == "back") return KeyframePlacement::back;
  throw std::invalid_argument("unknown keyframe placement '" + std::string(name) + "'");
}

FrameManifest place_keyframes(const FrameManifest &manifest, KeyframePlacement placement) {
  manifest.validate();
  const std::size_t total = manifest.frames.size();
  const std::size_t key_len = manifest.key_range.length;
  const std::size_t key_first = manifest.key_range.first;

  std::size_t offset = 0;
  switch (placement) {
    case KeyframePlacement::front:
      offset = 0;
      break;
    case KeyframePlacement::middle:
      offset = (total - key_len) / 2;
      break;
    case KeyframePlacement::back:
      offset = total - key_len;
      break;
  }

  std::vector<ModalityAtom> others;
  others.reserve(total - key_len);
  for (std::size_t i = 0; i < total; ++i) {
    if (i < key_first || i >= key_first + key_len) others.push_back(manifest.frames[i]);
  }

  FrameManifest out = manifest;
  out.frames.clear();
  out.frames.insert(out.frames.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(offset));
  out.frames.insert(out.frames.end(), manifest.frames.begin() + static_cast<std::ptrdiff_t>(key_first),
                    manifest.frames.begin() + static_cast<std::ptrdiff_t>(key_first + key_len));
  out.frames.insert(out.frames.end(), others.begin() + static_cast<std::ptrdiff_t>(offset), others.end());
  out.key_range = {offset, key_len};
  return out;
}

ProbeItem place_keyframes(const ProbeItem &video_probe, KeyframePlacement placement) {
  if (video_probe.mode != ProbeMode::video_placement || !video_probe.video) {
    throw std::invalid_argument("place_keyframes: probe '" + video_probe.id + "' is not a video probe");
  }
  ProbeItem out = video_probe;
  out.video = place_keyframes(*video_probe.video, placement);
  return out;
}

ProbeItem place_rag_image(const ProbeItem &rag_probe, std::size_t position) {
  if (rag_probe.mode != ProbeMode::rag_placement || !rag_probe.rag) {
    throw std::invalid_argument("place_rag_image: probe '" + rag_probe.id + "' is not a RAG probe");
  }
  const auto &images = rag_probe.rag->images;
  if (position < 1 || position > images.size()) {
    throw std::invalid_argument("place_rag_image: position " + std::to_string(position) + " outside [1, " +
                                std::to_string(images.size()) + "]");
  }
  const auto relevant = rag_probe.rag->relevant_position - 1;
  std::vector<ModalityAtom> reordered;
  reordered.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (i != relevant) reordered.push_back(images[i]);
  }
  reordered.insert(reordered.begin() + static_cast<std::ptrdiff_t>(position - 1), images[relevant]);

  ProbeItem out = rag_probe;
  out.rag->images = std::move(reordered);
  out.rag->relevant_position = position;
  return out;
}

std::string_view to_string(ImportanceStrategy strategy) {
  switch (strategy) {
    case ImportanceStrategy::begin:
      return "begin";
    case ImportanceStrategy::end:
      return "end";
    case ImportanceStrategy::begin_end:
      return "begin_end";
  }
  return "end";
}

ImportanceStrategy importance_strategy_from_string(std::string_view name) {
  if (name == "begin") return ImportanceStrategy::begin;
  if (name == "end") return ImportanceStrategy::end;
  if (name == "begin_end") return ImportanceStrategy::begin_end;
  throw std::invalid_argument("unknown importance strategy '" + std::string(name) + "'");
}

std::vector<std::size_t> importance_order(std::span<const double> scores, ImportanceStrategy strategy) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("importance scores must be finite");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  switch (strategy) {
    case ImportanceStrategy::end:
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
      return idx;
    case ImportanceStrategy::begin:
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
      return idx;
    case ImportanceStrategy::begin_end: {
      // All-equal scores keep the input order.
      if (std::adjacent_find(scores.begin(), scores.end(), std::not_equal_to<>()) == scores.end()) return idx;
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
      std::vector<std::size_t> out(n);
      std::size_t front = 0;
      std::size_t back = n;
      for (std::size_t r = 0; r < n; ++r) {
        if (r % 2 == 0) {
          out[--back] = idx[r];
        } else {
          out[front++] = idx[r];
        }
      }
      return out;
    }
  }
  return idx;
}

}  // namespace posbias
