#include <algorithm>
#include <sstream>

#include "posbias/atomic_file.hpp"
#include "posbias/error.hpp"
#include "posbias/serialize.hpp"

namespace posbias {

json to_json(const ModalityAtom &atom) {
  json j{{"kind", to_string(atom.kind)}, {"hash", atom.hash.hex()}};
  if (atom.kind == AtomKind::text) {
    j["text"] = atom.text;
  } else {
    j["path"] = atom.path.string();
    j["media_type"] = atom.media_type;
  }
  return j;
}

ModalityAtom atom_from_json(const json &j, const std::filesystem::path &base_dir) {
  const auto kind = atom_kind_from_string(j.at("kind").get<std::string>());
  ModalityAtom atom = kind == AtomKind::text
                          ? ModalityAtom::from_text(j.at("text").get<std::string>())
                          : ModalityAtom::load(kind, j.at("path").get<std::string>(), base_dir);
  if (j.contains("hash")) {
    const auto recorded = j.at("hash").get<std::string>();
    if (recorded != atom.hash.hex()) {
      throw DataError("content hash mismatch for '" + (atom.is_media() ? atom.path.string() : atom.text) +
                      "': recorded " + recorded + ", found " + atom.hash.hex());
    }
  }
  return atom;
}

json to_json(const FrameManifest &manifest) {
  json frames = json::array();
  for (const auto &f : manifest.frames) frames.push_back(to_json(f));
  return {{"fps", manifest.fps},
          {"key_range", {manifest.key_range.first, manifest.key_range.first + manifest.key_range.length - 1}},
          {"caption", manifest.caption},
          {"frames", std::move(frames)}};
}

FrameManifest frame_manifest_from_json(const json &j, const std::filesystem::path &base_dir) {
  FrameManifest m;
  m.fps = j.at("fps").get<double>();
  m.caption = j.value("caption", "");
  for (const auto &f : j.at("frames")) {
    if (f.is_string()) {
      m.frames.push_back(ModalityAtom::load(AtomKind::frame_seq_ref, f.get<std::string>(), base_dir));
    } else {
      m.frames.push_back(atom_from_json(f, base_dir));
    }
  }
  const auto &range = j.at("key_range");
  if (!range.is_array() || range.size() != 2) throw DataError("key_range must be [first, last]");
  const auto first = range[0].get<long long>();
  const auto last = range[1].get<long long>();
  if (first < 0 || last < first) throw DataError("key_range must satisfy 0 <= first <= last");
  m.key_range = {static_cast<std::size_t>(first), static_cast<std::size_t>(last - first + 1)};
  m.validate();
  return m;
}

json to_json(const ProbeItem &item) {
  json slots = json::array();
  for (const auto &slot : item.slots) {
    json s{{"label", slot.label}, {"content", to_json(slot.content.primary)}};
    if (slot.content.caption) s["caption"] = to_json(*slot.content.caption);
    slots.push_back(std::move(s));
  }
  json j{{"id", item.id},
         {"mode", to_string(item.mode)},
         {"stem", item.stem},
         {"slots", std::move(slots)},
         {"correct_index", item.correct_index},
         {"metadata", item.metadata}};
  if (item.anchor) j["anchor"] = to_json(*item.anchor);
  if (item.video) j["video"] = to_json(*item.video);
  if (item.rag) {
    json images = json::array();
    for (const auto &img : item.rag->images) images.push_back(to_json(img));
    j["rag"] = {{"images", std::move(images)}, {"relevant_position", item.rag->relevant_position}};
  }
  return j;
}

ProbeItem probe_from_json(const json &j, const std::filesystem::path &base_dir) {
  ProbeItem item;
  item.id = j.at("id").get<std::string>();
  item.mode = probe_mode_from_string(j.at("mode").get<std::string>());
  item.stem = j.value("stem", "");
  item.correct_index = j.at("correct_index").get<std::size_t>();
  if (j.contains("metadata")) item.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  if (j.contains("anchor")) item.anchor = atom_from_json(j.at("anchor"), base_dir);
  for (const auto &s : j.at("slots")) {
    OptionSlot slot;
    slot.label = s.at("label").get<std::string>();
    slot.content.primary = atom_from_json(s.at("content"), base_dir);
    if (s.contains("caption")) slot.content.caption = atom_from_json(s.at("caption"), base_dir);
    item.slots.push_back(std::move(slot));
  }
  if (j.contains("video")) item.video = frame_manifest_from_json(j.at("video"), base_dir);
  if (j.contains("rag")) {
    RagContext rag;
    for (const auto &img : j.at("rag").at("images")) rag.images.push_back(atom_from_json(img, base_dir));
    rag.relevant_position = j.at("rag").at("relevant_position").get<std::size_t>();
    item.rag = std::move(rag);
  }
  item.validate();
  return item;
}

json to_json(const VariantSet &set) {
  json variants = json::array();
  for (const auto &v : set.variants) variants.push_back(to_json(v));
  return {{"parent_id", set.parent_id},
          {"placement_of_correct", set.placement_of_correct},
          {"variants", std::move(variants)}};
}

std::string jsonl_with_header(std::string_view kind, const json &provenance, std::span<const json> rows) {
  std::string out = json{{"record", "header"},
                         {"schema_version", kSchemaVersion},
                         {"kind", kind},
                         {"provenance", provenance}}
                        .dump();
  out.push_back('\n');
  for (const auto &row : rows) {
    out += row.dump();
    out.push_back('\n');
  }
  return out;
}

void write_probe_file(const std::filesystem::path &path, std::span<const ProbeItem> items,
                      const json &provenance) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto &item : items) rows.push_back(to_json(item));
  write_file_atomic(path, jsonl_with_header("probes", provenance, rows));
}

std::vector<ProbeItem> read_probe_file(const std::filesystem::path &path, json *provenance) {
  std::istringstream in(read_file(path));
  const auto base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::vector<ProbeItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.value("record", "") == "header") {
      if (j.value("schema_version", 0) != kSchemaVersion) {
        throw DataError(path.string() + ": unsupported schema_version");
      }
      if (provenance) *provenance = j.value("provenance", json::object());
      continue;
    }
    try {
      items.push_back(probe_from_json(j, base_dir));
    } catch (const json::exception &e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

void write_variant_file(const std::filesystem::path &path, std::span<const VariantSet> sets,
                        const json &provenance) {
  std::vector<json> rows;
  rows.reserve(sets.size());
  for (const auto &set : sets) rows.push_back(to_json(set));
  write_file_atomic(path, jsonl_with_header("variant_sets", provenance, rows));
}

void write_frame_manifest(const std::filesystem::path &dir, const FrameManifest &manifest) {
  manifest.validate();
  std::filesystem::create_directories(dir);
  json frames = json::array();
  const int width = std::max<int>(5, static_cast<int>(std::to_string(manifest.frames.size()).size()));
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    const auto &src = manifest.frames[i];
    auto number = std::to_string(i);
    number.insert(0, static_cast<std::size_t>(width) - number.size(), '0');
    const auto name = number + src.path.extension().string();
    std::filesystem::copy_file(src.path, dir / name, std::filesystem::copy_options::overwrite_existing);
    frames.push_back(name);
  }
  const json sidecar{{"fps", manifest.fps},
                     {"key_range",
                      {manifest.key_range.first, manifest.key_range.first + manifest.key_range.length - 1}},
                     {"caption", manifest.caption},
                     {"frames", std::move(frames)}};
  write_file_atomic(dir / "manifest.json", sidecar.dump(2) + "\n");
}

FrameManifest read_frame_manifest(const std::filesystem::path &dir) {
  const auto sidecar = dir / "manifest.json";
  json j;
  try {
    j = json::parse(read_file(sidecar));
  } catch (const json::parse_error &e) {
    throw DataError(sidecar.string() + ": " + e.what());
  }
  return frame_manifest_from_json(j, dir);
}

}  // namespace posbias
