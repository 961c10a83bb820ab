#include "posbias/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "posbias/atomic_file.hpp"
#include "posbias/error.hpp"
#include "posbias/rng.hpp"

namespace posbias {
namespace {

using json = nlohmann::json;

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::filesystem::path parent_dir(const std::filesystem::path &p) {
  return p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path &file, Fn &&fn) {
  std::istringstream in(read_file(file));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      fn(json::parse(line), line_no);
    } catch (const json::exception &e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError &e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

// Natural order: numeric runs compare by value.
bool natural_less(const std::string &a, const std::string &b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ei = i, ej = j;
      while (ei < a.size() && std::isdigit(static_cast<unsigned char>(a[ei]))) ++ei;
      while (ej < b.size() && std::isdigit(static_cast<unsigned char>(b[ej]))) ++ej;
      const auto na = std::stoull(a.substr(i, ei - i));
      const auto nb = std::stoull(b.substr(j, ej - j));
      if (na != nb) return na < nb;
      i = ei;
      j = ej;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

}  // namespace

std::size_t answer_label_index(std::string_view label) {
  auto s = trim(label);
  if (s.size() > 3 && (s.rfind("Op.", 0) == 0 || s.rfind("op.", 0) == 0)) s = s.substr(3);
  if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]))) {
    return static_cast<std::size_t>(std::toupper(static_cast<unsigned char>(s[0])) - 'A' + 1);
  }
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return static_cast<std::size_t>(std::stoul(s));
  }
  return 0;
}

McqIngestResult ingest_mcq(const std::filesystem::path &table, std::size_t option_count) {
  if (option_count < 2) throw std::invalid_argument("ingest_mcq: option count must be at least 2");
  std::istringstream in(read_file(table));
  const auto base_dir = parent_dir(table);
  const auto where = [&](std::size_t line) { return table.string() + ":" + std::to_string(line) + ": "; };

  std::string line;
  if (!std::getline(in, line)) throw DataError(where(1) + "missing header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_tabs(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) column[trim(header[c])] = c;
  for (const char *required : {"id", "question", "answer_label", "image_path"}) {
    if (!column.count(required)) throw DataError(where(1) + "header lacks column '" + required + "'");
  }
  std::vector<std::size_t> option_columns;
  for (std::size_t k = 1; column.count("option_" + std::to_string(k)); ++k) {
    option_columns.push_back(column["option_" + std::to_string(k)]);
  }
  if (option_columns.size() < 2) throw DataError(where(1) + "header needs option_1 and option_2 columns");

  McqIngestResult result;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_tabs(line);
    if (cells.size() != header.size()) {
      throw DataError(where(line_no) + "expected " + std::to_string(header.size()) + " tab-separated fields, found " +
                      std::to_string(cells.size()));
    }
    const auto id = trim(cells[column["id"]]);
    if (id.empty()) throw DataError(where(line_no) + "empty id");
    if (!ids.insert(id).second) throw DataError(where(line_no) + "duplicate id '" + id + "'");

    std::vector<std::string> options;
    std::size_t last_filled = 0;
    for (std::size_t k = 0; k < option_columns.size(); ++k) {
      auto text = trim(cells[option_columns[k]]);
      if (!text.empty()) {
        options.push_back(std::move(text));
        last_filled = k + 1;
      }
    }
    if (options.size() != option_count) {
      result.skipped.push_back({line_no, id,
                                "has " + std::to_string(options.size()) + " options, filter wants " +
                                    std::to_string(option_count)});
      continue;
    }
    if (last_filled != options.size()) throw DataError(where(line_no) + "options must fill option_1..option_M without gaps");

    const auto answer = answer_label_index(cells[column["answer_label"]]);
    if (answer < 1 || answer > option_count) {
      throw DataError(where(line_no) + "answer label '" + trim(cells[column["answer_label"]]) +
                      "' does not name one of the " + std::to_string(option_count) + " options");
    }

    ProbeItem item;
    item.id = id;
    item.mode = ProbeMode::text_only;
    item.stem = trim(cells[column["question"]]);
    try {
      const auto image = trim(cells[column["image_path"]]);
      if (!image.empty()) item.anchor = ModalityAtom::load(AtomKind::image_ref, image, base_dir);
      std::vector<SlotContent> contents;
      for (auto &text : options) contents.push_back({ModalityAtom::from_text(std::move(text)), std::nullopt});
      item.slots = make_slots(std::move(contents));
      item.correct_index = answer;
      item.metadata["source"] = table.filename().string();
      item.metadata["source_line"] = std::to_string(line_no);
      item.validate();
    } catch (const DataError &e) {
      throw DataError(where(line_no) + e.what());
    }
    result.items.push_back(std::move(item));
  }
  return result;
}

std::vector<CaptionEntry> read_caption_manifest(const std::filesystem::path &manifest) {
  const auto base_dir = parent_dir(manifest);
  std::vector<CaptionEntry> entries;
  std::unordered_set<std::string> ids;
  for_each_json_line(manifest, [&](const json &j, std::size_t) {
    CaptionEntry e;
    e.id = j.at("id").get<std::string>();
    if (!ids.insert(e.id).second) throw DataError("duplicate id '" + e.id + "'");
    e.image = ModalityAtom::load(AtomKind::image_ref, j.at("image_path").get<std::string>(), base_dir);
    e.caption = j.at("caption").get<std::string>();
    entries.push_back(std::move(e));
  });
  return entries;
}

std::vector<ProbeItem> build_matching_probes(std::span<const CaptionEntry> entries, const MatchingOptions &options) {
  if (options.distractor_count < 1) {
    throw DataError("matching probes need at least one distractor (M >= 2)");
  }
  if (entries.size() < options.distractor_count + 1) {
    throw DataError("manifest has " + std::to_string(entries.size()) + " entries; need at least " +
                    std::to_string(options.distractor_count + 1));
  }
  const bool pair = options.mode == MatchingMode::pair;
  const auto content_of = [pair](const CaptionEntry &e) {
    return SlotContent{e.image, pair ? std::optional(ModalityAtom::from_text(e.caption)) : std::nullopt};
  };

  std::vector<ProbeItem> items;
  items.reserve(entries.size());
  for (std::size_t self = 0; self < entries.size(); ++self) {
    const auto &entry = entries[self];
    Stream stream(options.seed, entry.id);
    const auto correct = content_of(entry);

    std::vector<SlotContent> distractors;
    std::size_t attempt = 0;
    while (true) {
      // Sample from the other entries: draw from n-1 and skip over self.
      auto picks = stream.sample_without_replacement(entries.size() - 1, options.distractor_count);
      distractors.clear();
      std::set<ContentHash> seen{correct.hash()};
      bool distinct = true;
      for (auto p : picks) {
        const auto idx = p >= self ? p + 1 : p;
        auto content = content_of(entries[idx]);
        distinct = distinct && seen.insert(content.hash()).second;
        distractors.push_back(std::move(content));
      }
      if (distinct) break;
      if (++attempt >= options.max_resample_attempts) {
        throw DataError("entry '" + entry.id + "': could not draw " + std::to_string(options.distractor_count) +
                        " distractors with distinct content after " + std::to_string(attempt) + " attempts");
      }
    }

    const auto m = options.distractor_count + 1;
    const auto position = static_cast<std::size_t>(stream.below(m)) + 1;
    std::vector<SlotContent> contents = std::move(distractors);
    contents.insert(contents.begin() + static_cast<std::ptrdiff_t>(position - 1), correct);

    ProbeItem item;
    item.id = entry.id;
    item.mode = pair ? ProbeMode::pair : ProbeMode::image_only;
    item.stem = std::string(pair ? kPairStem : kImageOnlyStem);
    if (!pair) item.anchor = ModalityAtom::from_text(entry.caption);
    item.slots = make_slots(std::move(contents));
    item.correct_index = position;
    item.validate();
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ActionClip> read_clip_manifest(const std::filesystem::path &manifest) {
  const auto base_dir = parent_dir(manifest);
  std::vector<ActionClip> clips;
  for_each_json_line(manifest, [&](const json &j, std::size_t) {
    ActionClip clip;
    clip.id = j.at("id").get<std::string>();
    clip.fps = j.at("fps").get<double>();
    if (!(clip.fps > 0.0)) throw DataError("clip '" + clip.id + "': fps must be positive");
    clip.caption = j.value("caption", "");
    std::vector<std::filesystem::path> frame_paths;
    if (j.contains("frames")) {
      for (const auto &f : j.at("frames")) frame_paths.emplace_back(f.get<std::string>());
    } else {
      auto dir = std::filesystem::path(j.at("frames_dir").get<std::string>());
      if (dir.is_relative()) dir = base_dir / dir;
      if (!std::filesystem::is_directory(dir)) throw DataError("clip '" + clip.id + "': no directory " + dir.string());
      std::vector<std::string> names;
      for (const auto &de : std::filesystem::directory_iterator(dir)) {
        if (de.is_regular_file() && de.path().filename() != "manifest.json") {
          names.push_back(de.path().filename().string());
        }
      }
      std::sort(names.begin(), names.end(), natural_less);
      for (const auto &n : names) frame_paths.push_back(dir / n);
    }
    if (frame_paths.empty()) throw DataError("clip '" + clip.id + "' has no frames");
    for (const auto &p : frame_paths) clip.frames.push_back(ModalityAtom::load(AtomKind::frame_seq_ref, p, base_dir));
    clips.push_back(std::move(clip));
  });
  return clips;
}

std::vector<ActionClip> select_key_clips(std::span<const ActionClip> clips, double min_seconds, double max_seconds) {
  std::vector<ActionClip> out;
  for (const auto &c : clips) {
    const double d = c.duration();
    if (d >= min_seconds && d <= max_seconds) out.push_back(c);
  }
  return out;
}

std::size_t frame_count(double seconds, double fps) {
  return static_cast<std::size_t>(std::lround(seconds * fps));
}

std::string video_question(std::string_view caption) {
  return "Is anyone in the video performing the following action: " + std::string(caption) + "?";
}

namespace {

// `count` frames of `clip` sampled by index at the output rate.
void append_resampled(const ActionClip &clip, double out_fps, std::size_t count, std::vector<ModalityAtom> &dest) {
  for (std::size_t j = 0; j < count; ++j) {
    auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(j) * clip.fps / out_fps));
    dest.push_back(clip.frames[std::min(idx, clip.frames.size() - 1)]);
  }
}

}  // namespace

VideoProbe build_video_probe(const ActionClip &key_clip, std::span<const ActionClip> filler_pool,
                             const VideoProbeOptions &options) {
  if (!(options.fps > 0.0) || !(options.target_duration > 0.0)) {
    throw DataError("video probe needs positive fps and target duration");
  }
  if (key_clip.frames.empty()) throw DataError("key clip '" + key_clip.id + "' has no frames");
  if (key_clip.duration() > options.target_duration + 1e-9) {
    throw DataError("key clip '" + key_clip.id + "' lasts " + std::to_string(key_clip.duration()) +
                    " s, longer than the " + std::to_string(options.target_duration) + " s target");
  }
  const auto total = frame_count(options.target_duration, options.fps);
  const auto key_len = std::min(total, std::max<std::size_t>(1, frame_count(key_clip.duration(), options.fps)));

  FrameManifest manifest;
  manifest.fps = options.fps;
  manifest.caption = key_clip.caption;
  append_resampled(key_clip, options.fps, key_len, manifest.frames);
  manifest.key_range = {0, key_len};

  std::vector<const ActionClip *> fillers;
  for (const auto &c : filler_pool) {
    if (c.id != key_clip.id && !c.frames.empty()) fillers.push_back(&c);
  }
  if (manifest.frames.size() < total && fillers.empty()) {
    throw DataError("filler pool is empty; cannot extend key clip '" + key_clip.id + "'");
  }

  Stream stream(options.seed, key_clip.id);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::size_t barren_draws = 0;
  while (manifest.frames.size() < total) {
    if (cursor == order.size()) {
      order = stream.sample_without_replacement(fillers.size(), fillers.size());
      cursor = 0;
    }
    const auto &clip = *fillers[order[cursor++]];
    const auto want = std::min(total - manifest.frames.size(), frame_count(clip.duration(), options.fps));
    if (want == 0) {
      if (++barren_draws > 4 * fillers.size()) throw DataError("filler clips are too short to sample at this fps");
      continue;
    }
    append_resampled(clip, options.fps, want, manifest.frames);
  }
  manifest.validate();
  return {std::move(manifest), video_question(key_clip.caption)};
}

ProbeItem make_video_item(std::string id, VideoProbe probe) {
  ProbeItem item;
  item.id = std::move(id);
  item.mode = ProbeMode::video_placement;
  item.stem = std::move(probe.question);
  item.slots = {{"Yes", {ModalityAtom::from_text("Yes"), std::nullopt}},
                {"No", {ModalityAtom::from_text("No"), std::nullopt}}};
  item.correct_index = 1;
  item.video = std::move(probe.manifest);
  item.validate();
  return item;
}

ProbeItem build_rag_probe(const ProbeItem &mcq, std::span<const ModalityAtom> image_pool,
                          std::size_t distractor_count, std::uint64_t seed) {
  if (!mcq.anchor || mcq.anchor->kind != AtomKind::image_ref) {
    throw DataError("probe '" + mcq.id + "' has no question image to build a RAG set around");
  }
  std::vector<const ModalityAtom *> candidates;
  std::set<ContentHash> seen{mcq.anchor->hash};
  for (const auto &img : image_pool) {
    if (img.kind == AtomKind::image_ref && seen.insert(img.hash).second) candidates.push_back(&img);
  }
  if (candidates.size() < distractor_count) {
    throw DataError("image pool exhausted: probe '" + mcq.id + "' needs " + std::to_string(distractor_count) +
                    " other images, pool has " + std::to_string(candidates.size()));
  }
  Stream stream(seed, mcq.id + "#rag");
  std::vector<ModalityAtom> images;
  for (auto idx : stream.sample_without_replacement(candidates.size(), distractor_count)) {
    images.push_back(*candidates[idx]);
  }
  const auto position = static_cast<std::size_t>(stream.below(distractor_count + 1)) + 1;
  images.insert(images.begin() + static_cast<std::ptrdiff_t>(position - 1), *mcq.anchor);

  ProbeItem item = mcq;
  item.mode = ProbeMode::rag_placement;
  item.anchor.reset();
  item.rag = RagContext{std::move(images), position};
  item.validate();
  return item;
}

std::vector<ModalityAtom> anchor_images(std::span<const ProbeItem> items) {
  std::vector<ModalityAtom> out;
  std::set<ContentHash> seen;
  for (const auto &item : items) {
    if (item.anchor && item.anchor->kind == AtomKind::image_ref && seen.insert(item.anchor->hash).second) {
      out.push_back(*item.anchor);
    }
  }
  return out;
}

}  // namespace posbias
