#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posbias/endpoint.hpp"
#include "posbias/prompt.hpp"
#include "posbias/runner.hpp"
#include "posbias/simulate.hpp"

namespace posbias {

/// Normalized run configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::swap_audit;
  std::filesystem::path probes;
  std::filesystem::path demonstrations;  // ordering sweeps only
  std::optional<ModelEndpoint> endpoint;
  std::optional<BiasProfile> profile;
  std::optional<std::uint64_t> seed;
  std::size_t parallelism = 1;
  std::filesystem::path cache_dir;  // default: <config dir>/.posbias-cache
  std::filesystem::path output;     // default: <config dir>/trials.jsonl
  std::string template_id{kDefaultTemplate};
  VariantRule variant_rule = VariantRule::swap;
  std::size_t ordering_cap = kDefaultOrderingCap;
  bool retry_failed = false;

  [[nodiscard]] bool simulated() const { return profile.has_value(); }
  [[nodiscard]] RunOptions run_options() const;
  /// Normalized form; stable across key order and whitespace in the source.
  [[nodiscard]] nlohmann::json to_json() const;
  /// First 16 hex chars of sha256 over the normalized form.
  [[nodiscard]] std::string digest() const;
};

/// Throws ConfigError with a field-level message on contradictions.
RunConfig validate_config(const nlohmann::json &raw, const std::filesystem::path &base_dir);
/// Parses and validates a config file; parse failures are ConfigErrors.
RunConfig load_config(const std::filesystem::path &path);

std::unique_ptr<Model> make_model(const RunConfig &config);

/// Demonstration file: JSONL with {"id", "image_path", "text"} per line.
std::vector<Demonstration> read_demonstrations(const std::filesystem::path &path);

}  // namespace posbias
