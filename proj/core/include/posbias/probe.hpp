#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "posbias/atom.hpp"

namespace posbias {

enum class ProbeMode { text_only, image_only, pair, video_placement, rag_placement };

std::string_view to_string(ProbeMode mode);
ProbeMode probe_mode_from_string(std::string_view name);

/// Position label for 1-based slot index i: 1 -> "A", 2 -> "B", ...
std::string position_label(std::size_t index);
/// Label as shown to the model, e.g. "Op.A".
std::string display_label(std::string_view label);

/// Content of one option slot. Pair mode carries an image plus its caption.
struct SlotContent {
  ModalityAtom primary;
  std::optional<ModalityAtom> caption;

  [[nodiscard]] ContentHash hash() const;
  bool operator==(const SlotContent &) const = default;
};

struct OptionSlot {
  std::string label;
  SlotContent content;
  bool operator==(const OptionSlot &) const = default;
};

/// Contiguous block of key frames, as [first, first + length).
struct KeyRange {
  std::size_t first = 0;
  std::size_t length = 0;
  bool operator==(const KeyRange &) const = default;
};

/// Ordered frames of a constructed video with the key action block marked.
struct FrameManifest {
  std::vector<ModalityAtom> frames;
  double fps = 1.0;
  KeyRange key_range;
  std::string caption;

  /// Throws DataError when the key range is empty or out of bounds.
  void validate() const;
  bool operator==(const FrameManifest &) const = default;
};

/// Retrieved image set attached to a RAG probe; exactly one image is
/// relevant to the question.
struct RagContext {
  std::vector<ModalityAtom> images;
  std::size_t relevant_position = 1;  // 1-based
  bool operator==(const RagContext &) const = default;
};

struct ProbeItem {
  std::string id;
  ProbeMode mode = ProbeMode::text_only;
  std::string stem;
  std::optional<ModalityAtom> anchor;
  std::vector<OptionSlot> slots;
  std::size_t correct_index = 1;  // 1-based
  std::map<std::string, std::string> metadata;
  std::optional<FrameManifest> video;
  std::optional<RagContext> rag;

  [[nodiscard]] std::size_t option_count() const { return slots.size(); }
  [[nodiscard]] const OptionSlot &correct_slot() const { return slots.at(correct_index - 1); }
  [[nodiscard]] std::string correct_label() const { return correct_slot().label; }
  [[nodiscard]] std::vector<std::string> labels() const;

  /// Checks the shape rules for the item's mode plus the shared ones
  /// (M >= 2, correct index in range, pairwise distinct slot contents).
  /// Throws DataError naming the item.
  void validate() const;

  bool operator==(const ProbeItem &) const = default;
};

/// Slots labelled by position ("A", "B", ...) around the given contents.
std::vector<OptionSlot> make_slots(std::vector<SlotContent> contents);

}  // namespace posbias
