#include "posbias/probe.hpp"

#include <set>

#include "posbias/error.hpp"

namespace posbias {

std::string_view to_string(ProbeMode mode) {
  switch (mode) {
    case ProbeMode::text_only:
      return "text_only";
    case ProbeMode::image_only:
      return "image_only";
    case ProbeMode::pair:
      return "pair";
    case ProbeMode::video_placement:
      return "video_placement";
    case ProbeMode::rag_placement:
      return "rag_placement";
  }
  return "text_only";
}

ProbeMode probe_mode_from_string(std::string_view name) {
  if (name == "text_only") return ProbeMode::text_only;
  if (name == "image_only") return ProbeMode::image_only;
  if (name == "pair") return ProbeMode::pair;
  if (name == "video_placement") return ProbeMode::video_placement;
  if (name == "rag_placement") return ProbeMode::rag_placement;
  throw DataError("unknown probe mode '" + std::string(name) + "'");
}

std::string position_label(std::size_t index) {
  if (index < 1 || index > 26) throw std::out_of_range("position label index must be in [1, 26]");
  return std::string(1, static_cast<char>('A' + index - 1));
}

std::string display_label(std::string_view label) {
  if (label.size() == 1) return "Op." + std::string(label);
  return std::string(label);
}

ContentHash SlotContent::hash() const {
  return caption ? combine(primary.hash, caption->hash) : primary.hash;
}

void FrameManifest::validate() const {
  if (key_range.length == 0) throw DataError("frame manifest has an empty key range");
  if (key_range.first + key_range.length > frames.size()) {
    throw DataError("frame manifest key range [" + std::to_string(key_range.first) + ", " +
                    std::to_string(key_range.first + key_range.length) + ") exceeds " +
                    std::to_string(frames.size()) + " frames");
  }
  if (!(fps > 0.0)) throw DataError("frame manifest fps must be positive");
}

std::vector<std::string> ProbeItem::labels() const {
  std::vector<std::string> out;
  out.reserve(slots.size());
  for (const auto &slot : slots) out.push_back(slot.label);
  return out;
}

namespace {

bool all_slots(const ProbeItem &item, AtomKind kind, bool with_caption) {
  for (const auto &slot : item.slots) {
    if (slot.content.primary.kind != kind) return false;
    if (slot.content.caption.has_value() != with_caption) return false;
    if (with_caption && slot.content.caption->kind != AtomKind::text) return false;
  }
  return true;
}

}  // namespace

void ProbeItem::validate() const {
  const auto fail = [this](const std::string &why) { throw DataError("probe '" + id + "': " + why); };
  if (id.empty()) throw DataError("probe has an empty id");
  if (slots.size() < 2) fail("needs at least 2 option slots, has " + std::to_string(slots.size()));
  if (correct_index < 1 || correct_index > slots.size()) {
    fail("correct index " + std::to_string(correct_index) + " outside [1, " + std::to_string(slots.size()) + "]");
  }
  std::set<ContentHash> hashes;
  std::set<std::string> seen_labels;
  for (const auto &slot : slots) {
    if (!hashes.insert(slot.content.hash()).second) fail("two option slots share the same content");
    if (!seen_labels.insert(slot.label).second) fail("duplicate slot label '" + slot.label + "'");
  }

  switch (mode) {
    case ProbeMode::text_only:
      if (anchor && anchor->kind != AtomKind::image_ref) fail("text_only anchor must be an image");
      if (!all_slots(*this, AtomKind::text, false)) fail("text_only slots must all be text");
      break;
    case ProbeMode::image_only:
      if (!anchor || anchor->kind != AtomKind::text) fail("image_only needs a text anchor");
      if (!all_slots(*this, AtomKind::image_ref, false)) fail("image_only slots must all be images");
      break;
    case ProbeMode::pair:
      if (anchor) fail("pair mode takes no anchor");
      if (!all_slots(*this, AtomKind::image_ref, true)) fail("pair slots must all be image+caption pairs");
      break;
    case ProbeMode::video_placement:
      if (anchor) fail("video probes take no anchor");
      if (!video) fail("video probe has no frame manifest");
      video->validate();
      if (!all_slots(*this, AtomKind::text, false)) fail("video probe answers must be text");
      break;
    case ProbeMode::rag_placement: {
      if (anchor) fail("rag probes carry their image in the RAG set, not the anchor");
      if (!rag || rag->images.empty()) fail("rag probe has no image set");
      if (rag->relevant_position < 1 || rag->relevant_position > rag->images.size()) {
        fail("relevant image position out of range");
      }
      std::set<ContentHash> images;
      for (const auto &img : rag->images) {
        if (!images.insert(img.hash).second) fail("RAG image set contains duplicate images");
      }
      if (!all_slots(*this, AtomKind::text, false)) fail("rag probe options must be text");
      break;
    }
  }
}

std::vector<OptionSlot> make_slots(std::vector<SlotContent> contents) {
  std::vector<OptionSlot> slots;
  slots.reserve(contents.size());
  for (std::size_t i = 0; i < contents.size(); ++i) {
    slots.push_back({position_label(i + 1), std::move(contents[i])});
  }
  return slots;
}

}  // namespace posbias
