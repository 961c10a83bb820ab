#include "posbias/atom.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <vector>

#include "posbias/error.hpp"

namespace posbias {

std::string_view to_string(AtomKind kind) {
  switch (kind) {
    case AtomKind::text:
      return "text";
    case AtomKind::image_ref:
      return "image_ref";
    case AtomKind::frame_seq_ref:
      return "frame_seq_ref";
  }
  return "text";
}

AtomKind atom_kind_from_string(std::string_view name) {
  if (name == "text") return AtomKind::text;
  if (name == "image_ref") return AtomKind::image_ref;
  if (name == "frame_seq_ref") return AtomKind::frame_seq_ref;
  throw DataError("unknown atom kind '" + std::string(name) + "'");
}

ModalityAtom ModalityAtom::from_text(std::string text) {
  ModalityAtom atom;
  atom.kind = AtomKind::text;
  atom.hash = hash_text(text);
  atom.text = std::move(text);
  atom.media_type = "text/plain";
  return atom;
}

ModalityAtom ModalityAtom::load(AtomKind kind, const std::filesystem::path &raw,
                                const std::filesystem::path &base_dir) {
  if (kind == AtomKind::text) throw std::invalid_argument("ModalityAtom::load called for a text atom");
  if (raw.empty()) throw DataError("empty media path");
  auto resolved = raw.is_absolute() ? raw : base_dir / raw;
  std::error_code ec;
  auto canonical = std::filesystem::weakly_canonical(resolved, ec);
  if (!ec) resolved = canonical;

  std::ifstream in(resolved, std::ios::binary);
  if (!in || !std::filesystem::is_regular_file(resolved, ec)) {
    throw DataError("cannot resolve media file '" + raw.string() + "' (looked for " +
                    resolved.string() + ")");
  }
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  ModalityAtom atom;
  atom.kind = kind;
  atom.path = resolved;
  atom.media_type = media_type_for(resolved);
  atom.hash = hash_bytes(bytes);
  return atom;
}

std::string media_type_for(const std::filesystem::path &path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

}  // namespace posbias
