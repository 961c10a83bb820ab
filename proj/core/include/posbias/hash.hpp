#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace posbias {

/// 128-bit content digest (leading half of SHA-256).
struct ContentHash {
  std::array<std::uint8_t, 16> bytes{};

  [[nodiscard]] std::string hex() const;
  static ContentHash from_hex(std::string_view hex);

  auto operator<=>(const ContentHash &) const = default;
};

ContentHash hash_bytes(std::span<const std::uint8_t> data);
ContentHash hash_text(std::string_view text);
/// Digest of the concatenation of two digests (used for image+caption pairs).
ContentHash combine(const ContentHash &a, const ContentHash &b);

/// Full SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);

}  // namespace posbias

template <>
struct std::hash<posbias::ContentHash> {
  std::size_t operator()(const posbias::ContentHash &h) const noexcept {
    std::size_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | h.bytes[i];
    return out;
  }
};
