#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "posbias/probe.hpp"

namespace posbias {

struct PromptPart {
  enum class Kind { text, image };

  Kind kind = Kind::text;
  std::string text;
  std::filesystem::path path;
  std::string media_type;
  ContentHash hash;

  static PromptPart make_text(std::string text);
  static PromptPart make_image(const ModalityAtom &atom);

  bool operator==(const PromptPart &) const = default;
};

/// Rendered model input: text segments and image attachments in order.
struct Prompt {
  std::string template_id;
  std::vector<PromptPart> parts;

  /// Wire schema: {"template": id, "parts": [{"type": "text", "text": ...},
  /// {"type": "image", "path": ..., "media_type": ..., "hash": ...}]}.
  [[nodiscard]] nlohmann::json to_json() const;
  static Prompt from_json(const nlohmann::json &j);

  /// Canonical bytes used for cache keys. Images contribute their content
  /// hash and media type, never their path.
  [[nodiscard]] std::string canonical_bytes() const;

  bool operator==(const Prompt &) const = default;
};

/// In-context example prepended by ordering sweeps.
struct Demonstration {
  std::string id;
  ModalityAtom image;
  std::string text;
};

inline constexpr std::string_view kDefaultTemplate = "default";
inline constexpr std::string_view kPlainTemplate = "plain";
inline constexpr std::size_t kVideoFrameSamples = 15;

/// Known template ids.
std::span<const std::string_view> prompt_templates();

/// Renders a probe variant. Options appear in label order; for text_only and
/// image_only the anchor precedes the options. Throws std::invalid_argument
/// for unknown templates.
Prompt render_prompt(const ProbeItem &variant, std::string_view template_id = kDefaultTemplate,
                     std::span<const Demonstration> demonstrations = {});

/// `samples` frame indices spread uniformly by index over `total` frames.
std::vector<std::size_t> sample_frame_indices(std::size_t total, std::size_t samples);

}  // namespace posbias
