#include "posbias/answer.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <vector>

namespace posbias {

std::string_view to_string(AnswerMode mode) { return mode == AnswerMode::label ? "label" : "yes_no"; }

namespace {

struct Token {
  std::string text;
  bool op_prefixed = false;  // written as "Op.X"
};

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c >= 0x80; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<Token> tokenize(std::string_view raw) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (!is_word_char(static_cast<unsigned char>(raw[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw.size() && is_word_char(static_cast<unsigned char>(raw[j]))) ++j;
    Token tok{std::string(raw.substr(i, j - i))};
    // "Op.X" collapses into a single prefixed token X.
    if (lower(tok.text) == "op" && j + 1 < raw.size() && raw[j] == '.' &&
        is_word_char(static_cast<unsigned char>(raw[j + 1]))) {
      std::size_t k = j + 1;
      while (k < raw.size() && is_word_char(static_cast<unsigned char>(raw[k]))) ++k;
      tok = {std::string(raw.substr(j + 1, k - j - 1)), true};
      j = k;
    }
    tokens.push_back(std::move(tok));
    i = j;
  }
  return tokens;
}

std::optional<std::string> match_label(const Token &tok, std::span<const std::string> labels, bool relaxed_case) {
  for (const auto &label : labels) {
    const bool case_free = relaxed_case || tok.op_prefixed || label.size() > 1;
    if (case_free ? lower(tok.text) == lower(label) : tok.text == label) return label;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> parse_answer(std::string_view raw, std::span<const std::string> labels, AnswerMode mode) {
  if (labels.empty()) return std::nullopt;
  const auto tokens = tokenize(raw);

  if (mode == AnswerMode::yes_no) {
    for (const auto &tok : tokens) {
      const auto t = lower(tok.text);
      if (t != "yes" && t != "no") continue;
      for (const auto &label : labels) {
        if (lower(label) == t) return label;
      }
    }
    return std::nullopt;
  }

  static const std::set<std::string> kFiller{"is", "would", "be", "option", "choice", "should", "correct", "final"};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (lower(tokens[i].text) != "answer") continue;
    std::size_t j = i + 1;
    while (j < tokens.size() && kFiller.count(lower(tokens[j].text))) ++j;
    if (j < tokens.size()) {
      if (auto hit = match_label(tokens[j], labels, true)) return hit;
    }
  }

  std::optional<std::string> first;
  for (const auto &tok : tokens) {
    if (auto hit = match_label(tok, labels, false)) {
      if (!first) {
        first = hit;
      } else if (*first != *hit) {
        return std::nullopt;
      }
    }
  }
  return first;
}

}  // namespace posbias
