#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "posbias/probe.hpp"
#include "posbias/variants.hpp"

namespace posbias {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json to_json(const ModalityAtom &atom);
/// Media atoms are re-read from disk and their recorded hash is verified;
/// a mismatch or missing file is a DataError.
ModalityAtom atom_from_json(const json &j, const std::filesystem::path &base_dir);

json to_json(const FrameManifest &manifest);
FrameManifest frame_manifest_from_json(const json &j, const std::filesystem::path &base_dir);

json to_json(const ProbeItem &item);
ProbeItem probe_from_json(const json &j, const std::filesystem::path &base_dir);

json to_json(const VariantSet &set);

/// JSONL artifact: a header line {"record":"header", ...} followed by one
/// item per line.
std::string jsonl_with_header(std::string_view kind, const json &provenance, std::span<const json> rows);

/// Probe file: header + one ProbeItem per line. Written atomically.
void write_probe_file(const std::filesystem::path &path, std::span<const ProbeItem> items,
                      const json &provenance);
std::vector<ProbeItem> read_probe_file(const std::filesystem::path &path, json *provenance = nullptr);

void write_variant_file(const std::filesystem::path &path, std::span<const VariantSet> sets,
                        const json &provenance);

/// Frame manifest sidecar ("manifest.json") next to the numbered frame files.
void write_frame_manifest(const std::filesystem::path &dir, const FrameManifest &manifest);
FrameManifest read_frame_manifest(const std::filesystem::path &dir);

}  // namespace posbias
