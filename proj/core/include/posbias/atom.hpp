#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "posbias/hash.hpp"

namespace posbias {

enum class AtomKind { text, image_ref, frame_seq_ref };

std::string_view to_string(AtomKind kind);
AtomKind atom_kind_from_string(std::string_view name);

/// One unit of multimodal context: a text string or a reference to a media
/// file. The hash covers the payload bytes only (UTF-8 text, or file bytes).
struct ModalityAtom {
  AtomKind kind = AtomKind::text;
  std::string text;
  std::filesystem::path path;  // absolute once loaded; empty for text
  std::string media_type;
  ContentHash hash;

  static ModalityAtom from_text(std::string text);

  /// Resolves `raw` against `base_dir` (when relative), reads the file and
  /// hashes it. Throws DataError if the file cannot be read.
  static ModalityAtom load(AtomKind kind, const std::filesystem::path &raw,
                           const std::filesystem::path &base_dir);

  [[nodiscard]] bool is_media() const { return kind != AtomKind::text; }

  bool operator==(const ModalityAtom &) const = default;
};

/// Media type guessed from the file extension.
std::string media_type_for(const std::filesystem::path &path);

}  // namespace posbias
