#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace posbias {

enum class AnswerMode { label, yes_no };

std::string_view to_string(AnswerMode mode);

/// Extracts the model's pick from free text. Returns std::nullopt when the
/// text is unparseable; the result is always an element of `labels`.
///
/// Label mode: an "answer is X" / "answer: X" pattern wins; otherwise the text
/// must name exactly one distinct label as a standalone token ("B", "Op.B",
/// "(B)"). Bare single-letter labels must be uppercase; "Op."-prefixed and
/// multi-character labels match case-insensitively.
/// Yes/no mode: the first standalone yes/no token, case-insensitive.
std::optional<std::string> parse_answer(std::string_view raw, std::span<const std::string> labels, AnswerMode mode);

}  // namespace posbias
