#include "posbias/store.hpp"

#include <unistd.h>

#include <algorithm>
#include <sstream>

#include "posbias/atomic_file.hpp"
#include "posbias/error.hpp"
#include "posbias/hash.hpp"
#include "posbias/serialize.hpp"

namespace posbias {

nlohmann::json TrialRecord::canonical_json() const {
  nlohmann::json j{{"experiment", experiment},
                   {"parent_id", parent_id},
                   {"variant_key", variant_key},
                   {"variant_index", variant_index},
                   {"option_count", option_count},
                   {"correct_index", correct_index},
                   {"correct_label", correct_label},
                   {"cache_key", cache_key},
                   {"model_id", model_id},
                   {"raw_response", raw_response},
                   {"pick", pick ? nlohmann::json(*pick) : nlohmann::json(nullptr)},
                   {"pick_index", pick_index},
                   {"correct", correct},
                   {"error_class", to_string(error_class)},
                   {"error_message", error_message}};
  return j;
}

nlohmann::json TrialRecord::to_json() const {
  auto j = canonical_json();
  j["schema_version"] = kSchemaVersion;
  j["attempts"] = attempts;
  j["latency_ms"] = latency_ms;
  j["from_cache"] = from_cache;
  return j;
}

TrialRecord TrialRecord::from_json(const nlohmann::json &j) {
  if (j.value("schema_version", 0) != kSchemaVersion) throw DataError("trial record has an unsupported schema_version");
  TrialRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.parent_id = j.at("parent_id").get<std::string>();
  r.variant_key = j.at("variant_key").get<std::string>();
  r.variant_index = j.at("variant_index").get<std::size_t>();
  r.option_count = j.at("option_count").get<std::size_t>();
  r.correct_index = j.at("correct_index").get<std::size_t>();
  r.correct_label = j.at("correct_label").get<std::string>();
  r.cache_key = j.at("cache_key").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.raw_response = j.at("raw_response").get<std::string>();
  if (!j.at("pick").is_null()) r.pick = j.at("pick").get<std::string>();
  r.pick_index = j.at("pick_index").get<std::size_t>();
  r.correct = j.at("correct").get<bool>();
  r.error_class = error_class_from_string(j.at("error_class").get<std::string>());
  r.error_message = j.value("error_message", "");
  r.attempts = j.value("attempts", 0);
  r.latency_ms = j.value("latency_ms", 0.0);
  r.from_cache = j.value("from_cache", false);
  if (r.correct && !r.parsed()) throw DataError("trial record marked correct without a parsed pick");
  if (r.pick_index > r.option_count || r.correct_index < 1 || r.correct_index > r.option_count) {
    throw DataError("trial record indices out of range for '" + r.parent_id + "'");
  }
  return r;
}

JsonlLog::~JsonlLog() {
  if (file_) std::fclose(file_);
}

std::vector<nlohmann::json> JsonlLog::open(const std::filesystem::path &path, std::string_view kind,
                                           const nlohmann::json &provenance) {
  if (file_) throw std::logic_error("JsonlLog already open");
  std::vector<nlohmann::json> rows;
  std::error_code ec;
  const bool exists = std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0;
  if (exists) {
    const auto content = read_file(path);
    std::size_t good_bytes = 0;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      ++line_no;
      if (nl == std::string::npos) break;  // torn tail, no newline
      const std::string_view line(content.data() + pos, nl - pos);
      if (!line.empty()) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
          throw DataError(path.string() + ":" + std::to_string(line_no) + ": corrupt record: " + e.what());
        }
        if (line_no == 1) {
          if (j.value("record", "") != "header" || j.value("kind", "") != kind) {
            throw DataError(path.string() + ": not a " + std::string(kind) + " log");
          }
          header_ = std::move(j);
        } else {
          rows.push_back(std::move(j));
        }
      }
      pos = nl + 1;
      good_bytes = pos;
    }
    if (good_bytes < content.size()) std::filesystem::resize_file(path, good_bytes);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw DataError("cannot open '" + path.string() + "' for appending");
  if (!exists || header_.is_null()) {
    header_ = {{"record", "header"}, {"schema_version", kSchemaVersion}, {"kind", kind}, {"provenance", provenance}};
    const auto line = header_.dump() + "\n";
    std::fwrite(line.data(), 1, line.size(), file_);
    std::fflush(file_);
  }
  return rows;
}

void JsonlLog::append(const nlohmann::json &row) {
  if (!file_) return;
  const auto line = row.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw DataError("failed to append to log");
  }
}

std::unique_ptr<TrialStore> TrialStore::open(const std::filesystem::path &path, const nlohmann::json &provenance) {
  auto store = std::make_unique<TrialStore>();
  for (const auto &row : store->log_.open(path, "trials", provenance)) {
    auto record = TrialRecord::from_json(row);
    if (auto it = store->by_cache_key_.find(record.cache_key); it != store->by_cache_key_.end()) {
      const auto &seen = store->records_[it->second];
      if (!seen.failed() && !record.failed() && seen.raw_response != record.raw_response) {
        throw DataError(path.string() + ": cache key " + record.cache_key + " carries two different responses");
      }
    }
    store->index(record);
    store->records_.push_back(std::move(record));
  }
  return store;
}

void TrialStore::index(const TrialRecord &record) {
  const auto pos = records_.size();
  by_trial_[{record.parent_id, record.variant_key}] = pos;
  if (record.failed()) {
    by_cache_key_.try_emplace(record.cache_key, pos);
  } else {
    by_cache_key_[record.cache_key] = pos;
  }
}

void TrialStore::append(TrialRecord record) {
  std::lock_guard lock(mutex_);
  log_.append(record.to_json());
  index(record);
  records_.push_back(std::move(record));
}

std::vector<TrialRecord> TrialStore::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<TrialRecord> TrialStore::latest() const {
  std::lock_guard lock(mutex_);
  std::vector<TrialRecord> out;
  out.reserve(by_trial_.size());
  for (const auto &[key, pos] : by_trial_) out.push_back(records_[pos]);
  std::stable_sort(out.begin(), out.end(), [](const TrialRecord &a, const TrialRecord &b) {
    return std::tie(a.parent_id, a.variant_index, a.variant_key) <
           std::tie(b.parent_id, b.variant_index, b.variant_key);
  });
  return out;
}

std::optional<TrialRecord> TrialStore::find_trial(const std::string &parent_id, const std::string &variant_key) const {
  std::lock_guard lock(mutex_);
  auto it = by_trial_.find({parent_id, variant_key});
  if (it == by_trial_.end()) return std::nullopt;
  return records_[it->second];
}

std::optional<TrialRecord> TrialStore::find_by_cache_key(const std::string &cache_key) const {
  std::lock_guard lock(mutex_);
  auto it = by_cache_key_.find(cache_key);
  if (it == by_cache_key_.end()) return std::nullopt;
  return records_[it->second];
}

std::size_t TrialStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string TrialStore::canonical_digest() const {
  std::string bytes;
  for (const auto &r : latest()) {
    bytes += r.canonical_json().dump();
    bytes.push_back('\n');
  }
  return sha256_hex(bytes);
}

nlohmann::json TrialStore::provenance() const {
  std::lock_guard lock(mutex_);
  return log_.header().is_null() ? nlohmann::json::object() : log_.header().value("provenance", nlohmann::json::object());
}

std::unique_ptr<ResponseCache> ResponseCache::open(const std::filesystem::path &dir) {
  auto cache = std::make_unique<ResponseCache>();
  for (const auto &row : cache->log_.open(dir / "responses.jsonl", "responses", nlohmann::json::object())) {
    CachedResponse r;
    r.cache_key = row.at("cache_key").get<std::string>();
    r.model_id = row.value("model_id", "");
    r.raw_response = row.value("raw_response", "");
    r.error_class = error_class_from_string(row.value("error_class", "none"));
    r.error_message = row.value("error_message", "");
    r.attempts = row.value("attempts", 0);
    cache->entries_[r.cache_key] = std::move(r);
  }
  return cache;
}

std::optional<CachedResponse> ResponseCache::find(const std::string &cache_key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(cache_key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const CachedResponse &response) {
  std::lock_guard lock(mutex_);
  log_.append({{"cache_key", response.cache_key},
               {"model_id", response.model_id},
               {"raw_response", response.raw_response},
               {"error_class", to_string(response.error_class)},
               {"error_message", response.error_message},
               {"attempts", response.attempts}});
  entries_[response.cache_key] = response;
}

}  // namespace posbias
