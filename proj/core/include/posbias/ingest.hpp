#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "posbias/probe.hpp"

namespace posbias {

// Tabular multiple-choice probes -------------------------------------------

struct SkippedRow {
  std::size_t line = 0;  // 1-based file line, header is line 1
  std::string id;
  std::string reason;
};

struct McqIngestResult {
  std::vector<ProbeItem> items;
  std::vector<SkippedRow> skipped;
};

/// Reads the tab-separated probe table (columns id, question, option_1..K,
/// answer_label, image_path; header required) and keeps rows with exactly
/// `option_count` non-empty options. Throws DataError with the line number
/// on malformed rows and on duplicate ids. An empty image_path gives a
/// text-only probe without an image anchor.
McqIngestResult ingest_mcq(const std::filesystem::path &table, std::size_t option_count);

/// Maps "C", "c", "Op.C" or "3" to a 1-based index; 0 when unrecognized.
std::size_t answer_label_index(std::string_view label);

// Image-caption matching probes ---------------------------------------------

struct CaptionEntry {
  std::string id;
  ModalityAtom image;
  std::string caption;
};

/// Line-delimited JSON records {"id", "image_path", "caption"}; image paths
/// resolve against the manifest's directory.
std::vector<CaptionEntry> read_caption_manifest(const std::filesystem::path &manifest);

enum class MatchingMode { image_only, pair };

struct MatchingOptions {
  MatchingMode mode = MatchingMode::image_only;
  std::size_t distractor_count = 3;
  std::uint64_t seed = 0;
  std::size_t max_resample_attempts = 32;
};

/// One probe per entry; distractors are other entries sampled without
/// replacement from a per-item stream derived from (seed, entry id).
std::vector<ProbeItem> build_matching_probes(std::span<const CaptionEntry> entries, const MatchingOptions &options);

inline constexpr std::string_view kImageOnlyStem = "Which image best matches the caption?";
inline constexpr std::string_view kPairStem = "Which image-caption pair matches best?";

// Video keyframe probes -------------------------------------------------------

struct ActionClip {
  std::string id;
  std::vector<ModalityAtom> frames;
  double fps = 1.0;
  std::string caption;

  [[nodiscard]] double duration() const { return static_cast<double>(frames.size()) / fps; }
};

/// Line-delimited JSON records {"id", "fps", "caption", "frames": [...]} or
/// {"id", "fps", "caption", "frames_dir": "..."}; directory frames are taken
/// in natural filename order.
std::vector<ActionClip> read_clip_manifest(const std::filesystem::path &manifest);

/// Clips whose duration lies in [min_seconds, max_seconds].
std::vector<ActionClip> select_key_clips(std::span<const ActionClip> clips, double min_seconds = 2.0,
                                         double max_seconds = 3.0);

struct VideoProbeOptions {
  double target_duration = 10.0;
  double fps = 3.0;
  std::uint64_t seed = 0;
};

struct VideoProbe {
  FrameManifest manifest;
  std::string question;
};

/// Number of output frames for `seconds` at `fps`: lround(seconds * fps).
std::size_t frame_count(double seconds, double fps);

std::string video_question(std::string_view caption);

/// Key clip first, then seed-sampled filler clips (the key clip's own id is
/// excluded) until target_duration is reached. Every clip is resampled to
/// options.fps by index. Throws DataError if the key clip is longer than the
/// target or the filler pool cannot supply frames.
VideoProbe build_video_probe(const ActionClip &key_clip, std::span<const ActionClip> filler_pool,
                             const VideoProbeOptions &options);

/// Wraps a video probe as a yes/no ProbeItem whose correct answer is "Yes".
ProbeItem make_video_item(std::string id, VideoProbe probe);

// RAG probes -------------------------------------------------------------------

/// Moves the probe's anchor image into a RAG set together with
/// `distractor_count` pool images (distinct from it and from each other).
/// The relevant image starts at a seed-derived position.
ProbeItem build_rag_probe(const ProbeItem &mcq, std::span<const ModalityAtom> image_pool,
                          std::size_t distractor_count, std::uint64_t seed);

/// Distinct anchor images of the given probes, in first-seen order.
std::vector<ModalityAtom> anchor_images(std::span<const ProbeItem> items);

}  // namespace posbias
