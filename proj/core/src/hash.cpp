#include "posbias/hash.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <stdexcept>
#include <vector>

namespace posbias {
namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

std::array<std::uint8_t, SHA256_DIGEST_LENGTH> sha256(const void *data, std::size_t size) {
  std::array<std::uint8_t, SHA256_DIGEST_LENGTH> digest{};
  SHA256(static_cast<const unsigned char *>(data), size, digest.data());
  return digest;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string ContentHash::hex() const {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

ContentHash ContentHash::from_hex(std::string_view hex) {
  ContentHash h;
  if (hex.size() != h.bytes.size() * 2) throw std::invalid_argument("content hash must be 32 hex digits");
  for (std::size_t i = 0; i < h.bytes.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("content hash has a non-hex digit");
    h.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return h;
}

ContentHash hash_bytes(std::span<const std::uint8_t> data) {
  const auto digest = sha256(data.data(), data.size());
  ContentHash h;
  std::copy_n(digest.begin(), h.bytes.size(), h.bytes.begin());
  return h;
}

ContentHash hash_text(std::string_view text) {
  return hash_bytes({reinterpret_cast<const std::uint8_t *>(text.data()), text.size()});
}

ContentHash combine(const ContentHash &a, const ContentHash &b) {
  std::array<std::uint8_t, 32> joined{};
  std::copy(a.bytes.begin(), a.bytes.end(), joined.begin());
  std::copy(b.bytes.begin(), b.bytes.end(), joined.begin() + 16);
  return hash_bytes(joined);
}

std::string sha256_hex(std::string_view data) {
  const auto digest = sha256(data.data(), data.size());
  std::string out;
  out.reserve(digest.size() * 2);
  for (auto b : digest) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::vector<unsigned char> out(4 * ((data.size() + 2) / 3) + 1);
  const int written = EVP_EncodeBlock(out.data(), data.data(), static_cast<int>(data.size()));
  return {reinterpret_cast<const char *>(out.data()), static_cast<std::size_t>(written)};
}

}  // namespace posbias
