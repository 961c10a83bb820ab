#include "posbias/prompt.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace posbias {

PromptPart PromptPart::make_text(std::string text) {
  PromptPart p;
  p.kind = Kind::text;
  p.text = std::move(text);
  return p;
}

PromptPart PromptPart::make_image(const ModalityAtom &atom) {
  if (!atom.is_media()) throw std::invalid_argument("PromptPart::make_image needs a media atom");
  PromptPart p;
  p.kind = Kind::image;
  p.path = atom.path;
  p.media_type = atom.media_type;
  p.hash = atom.hash;
  return p;
}

nlohmann::json Prompt::to_json() const {
  auto parts_json = nlohmann::json::array();
  for (const auto &p : parts) {
    if (p.kind == PromptPart::Kind::text) {
      parts_json.push_back({{"type", "text"}, {"text", p.text}});
    } else {
      parts_json.push_back(
          {{"type", "image"}, {"path", p.path.string()}, {"media_type", p.media_type}, {"hash", p.hash.hex()}});
    }
  }
  return {{"template", template_id}, {"parts", std::move(parts_json)}};
}

Prompt Prompt::from_json(const nlohmann::json &j) {
  Prompt prompt;
  prompt.template_id = j.at("template").get<std::string>();
  for (const auto &pj : j.at("parts")) {
    const auto type = pj.at("type").get<std::string>();
    PromptPart p;
    if (type == "text") {
      p.kind = PromptPart::Kind::text;
      p.text = pj.at("text").get<std::string>();
    } else if (type == "image") {
      p.kind = PromptPart::Kind::image;
      p.path = pj.at("path").get<std::string>();
      p.media_type = pj.at("media_type").get<std::string>();
      p.hash = ContentHash::from_hex(pj.at("hash").get<std::string>());
    } else {
      throw std::invalid_argument("unknown prompt part type '" + type + "'");
    }
    prompt.parts.push_back(std::move(p));
  }
  return prompt;
}

std::string Prompt::canonical_bytes() const {
  auto parts_json = nlohmann::json::array();
  for (const auto &p : parts) {
    if (p.kind == PromptPart::Kind::text) {
      parts_json.push_back({{"type", "text"}, {"text", p.text}});
    } else {
      parts_json.push_back({{"type", "image"}, {"media_type", p.media_type}, {"hash", p.hash.hex()}});
    }
  }
  return nlohmann::json{{"template", template_id}, {"parts", std::move(parts_json)}}.dump();
}

namespace {

constexpr std::array<std::string_view, 2> kTemplates{kDefaultTemplate, kPlainTemplate};

std::string option_prefix(std::string_view template_id, const std::string &label) {
  return template_id == kPlainTemplate ? label + ". " : display_label(label) + ": ";
}

std::string label_list(const ProbeItem &item, std::string_view template_id) {
  std::string out;
  for (std::size_t i = 0; i < item.slots.size(); ++i) {
    if (i > 0) out += (i + 1 == item.slots.size()) ? " or " : ", ";
    out += template_id == kPlainTemplate ? item.slots[i].label : display_label(item.slots[i].label);
  }
  return out;
}

std::string label_instruction(const ProbeItem &item, std::string_view template_id) {
  return "Answer with the option label (" + label_list(item, template_id) + ") only.";
}

void add_text_options(const ProbeItem &item, std::string_view template_id, std::vector<PromptPart> &parts) {
  for (const auto &slot : item.slots) {
    parts.push_back(PromptPart::make_text(option_prefix(template_id, slot.label) + slot.content.primary.text));
  }
}

}  // namespace

std::span<const std::string_view> prompt_templates() { return kTemplates; }

std::vector<std::size_t> sample_frame_indices(std::size_t total, std::size_t samples) {
  std::vector<std::size_t> out;
  if (total == 0) return out;
  if (samples >= total) {
    for (std::size_t i = 0; i < total; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t j = 0; j < samples; ++j) out.push_back(j * total / samples);
  return out;
}

Prompt render_prompt(const ProbeItem &variant, std::string_view template_id,
                     std::span<const Demonstration> demonstrations) {
  if (std::find(kTemplates.begin(), kTemplates.end(), template_id) == kTemplates.end()) {
    throw std::invalid_argument("unknown prompt template '" + std::string(template_id) + "'");
  }
  Prompt prompt;
  prompt.template_id = std::string(template_id);
  auto &parts = prompt.parts;

  if (!demonstrations.empty()) {
    parts.push_back(PromptPart::make_text("Examples:"));
    for (const auto &demo : demonstrations) {
      parts.push_back(PromptPart::make_image(demo.image));
      parts.push_back(PromptPart::make_text(demo.text));
    }
  }

  switch (variant.mode) {
    case ProbeMode::text_only:
      if (variant.anchor) parts.push_back(PromptPart::make_image(*variant.anchor));
      parts.push_back(PromptPart::make_text("Question: " + variant.stem));
      add_text_options(variant, template_id, parts);
      parts.push_back(PromptPart::make_text(label_instruction(variant, template_id)));
      break;
    case ProbeMode::image_only:
      parts.push_back(PromptPart::make_text("Caption: " + variant.anchor->text));
      parts.push_back(PromptPart::make_text(variant.stem));
      for (const auto &slot : variant.slots) {
        parts.push_back(PromptPart::make_text(option_prefix(template_id, slot.label)));
        parts.push_back(PromptPart::make_image(slot.content.primary));
      }
      parts.push_back(PromptPart::make_text(label_instruction(variant, template_id)));
      break;
    case ProbeMode::pair:
      parts.push_back(PromptPart::make_text(variant.stem));
      for (const auto &slot : variant.slots) {
        parts.push_back(PromptPart::make_text(option_prefix(template_id, slot.label)));
        parts.push_back(PromptPart::make_image(slot.content.primary));
        parts.push_back(PromptPart::make_text(slot.content.caption->text));
      }
      parts.push_back(PromptPart::make_text(label_instruction(variant, template_id)));
      break;
    case ProbeMode::video_placement: {
      const auto &frames = variant.video->frames;
      for (auto idx : sample_frame_indices(frames.size(), kVideoFrameSamples)) {
        parts.push_back(PromptPart::make_image(frames[idx]));
      }
      parts.push_back(PromptPart::make_text(variant.stem));
      parts.push_back(PromptPart::make_text("Answer with Yes or No only."));
      break;
    }
    case ProbeMode::rag_placement:
      parts.push_back(PromptPart::make_text("Retrieved images:"));
      for (const auto &img : variant.rag->images) parts.push_back(PromptPart::make_image(img));
      parts.push_back(PromptPart::make_text("Question: " + variant.stem));
      add_text_options(variant, template_id, parts);
      parts.push_back(PromptPart::make_text(label_instruction(variant, template_id)));
      break;
  }
  return prompt;
}

}  // namespace posbias
