#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "posbias/endpoint.hpp"

namespace posbias {

/// One model response to one variant.
///
/// Identity is (parent_id, variant_key). `attempts`, `latency_ms` and
/// `from_cache` are run metadata and are excluded from canonical comparisons.
struct TrialRecord {
  std::string experiment;
  std::string parent_id;
  std::string variant_key;        // "k=2", "rank=5", "front", "pos=3"
  std::size_t variant_index = 0;  // k, ordering rank, or 1-based placement index
  std::size_t option_count = 0;
  std::size_t correct_index = 0;  // 1-based slot
  std::string correct_label;
  std::string cache_key;
  std::string model_id;
  std::string raw_response;
  std::optional<std::string> pick;
  std::size_t pick_index = 0;  // 1-based slot, 0 when unparseable
  bool correct = false;
  ErrorClass error_class = ErrorClass::none;
  std::string error_message;

  int attempts = 0;
  double latency_ms = 0.0;
  bool from_cache = false;

  [[nodiscard]] bool parsed() const { return pick_index != 0; }
  [[nodiscard]] bool failed() const { return error_class != ErrorClass::none; }

  /// Full record including metadata, with "schema_version".
  [[nodiscard]] nlohmann::json to_json() const;
  /// Record without run metadata; stable across reruns.
  [[nodiscard]] nlohmann::json canonical_json() const;
  static TrialRecord from_json(const nlohmann::json &j);

  bool operator==(const TrialRecord &) const = default;
};

/// Append-only line log: a header line, then one JSON object per line.
/// Opening an existing file replays it; a torn final line (crash mid-write)
/// is dropped and truncated away before the next append.
class JsonlLog {
 public:
  JsonlLog() = default;
  JsonlLog(const JsonlLog &) = delete;
  JsonlLog &operator=(const JsonlLog &) = delete;
  ~JsonlLog();

  /// Opens or creates `path`. `header` is written only for a new file.
  /// Returns the replayed rows (header excluded).
  std::vector<nlohmann::json> open(const std::filesystem::path &path, std::string_view kind,
                                   const nlohmann::json &provenance);
  void append(const nlohmann::json &row);
  [[nodiscard]] bool is_open() const { return file_ != nullptr; }
  [[nodiscard]] const nlohmann::json &header() const { return header_; }

 private:
  std::FILE *file_ = nullptr;
  nlohmann::json header_;
};

/// Trial records with an index by cache key. Appends are serialized through
/// one writer; the on-disk log, when attached, is the source of truth.
class TrialStore {
 public:
  /// In-memory store.
  TrialStore() = default;

  /// Store backed by an append-only log at `path`; existing records are
  /// replayed. Throws DataError on corrupt interior lines or a cache key that
  /// maps to two different responses.
  static std::unique_ptr<TrialStore> open(const std::filesystem::path &path, const nlohmann::json &provenance = {});

  void append(TrialRecord record);

  /// All records in append order.
  [[nodiscard]] std::vector<TrialRecord> records() const;
  /// Latest record per (parent_id, variant_key), sorted by parent then
  /// variant index then key.
  [[nodiscard]] std::vector<TrialRecord> latest() const;
  [[nodiscard]] std::optional<TrialRecord> find_trial(const std::string &parent_id,
                                                      const std::string &variant_key) const;
  [[nodiscard]] std::optional<TrialRecord> find_by_cache_key(const std::string &cache_key) const;
  [[nodiscard]] std::size_t size() const;

  /// SHA-256 over the canonical (metadata-free) latest records.
  [[nodiscard]] std::string canonical_digest() const;
  [[nodiscard]] nlohmann::json provenance() const;

 private:
  void index(const TrialRecord &record);

  mutable std::mutex mutex_;
  std::vector<TrialRecord> records_;
  std::map<std::pair<std::string, std::string>, std::size_t> by_trial_;
  std::unordered_map<std::string, std::size_t> by_cache_key_;
  JsonlLog log_;
};

/// Model responses keyed by cache key, shared across stores and reruns.
struct CachedResponse {
  std::string cache_key;
  std::string model_id;
  std::string raw_response;
  ErrorClass error_class = ErrorClass::none;
  std::string error_message;
  int attempts = 0;
};

class ResponseCache {
 public:
  ResponseCache() = default;
  static std::unique_ptr<ResponseCache> open(const std::filesystem::path &dir);

  [[nodiscard]] std::optional<CachedResponse> find(const std::string &cache_key) const;
  void put(const CachedResponse &response);

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, CachedResponse> entries_;
  JsonlLog log_;
};

}  // namespace posbias
