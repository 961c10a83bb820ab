#include "posbias/config.hpp"

#include <cstdlib>
#include <fstream>

#include "posbias/atomic_file.hpp"
#include "posbias/error.hpp"
#include "posbias/hash.hpp"

namespace posbias {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json &expect(const json &j, const char *field, json::value_t type, const char *what) {
  const auto &v = j.at(field);
  const bool ok = type == json::value_t::number_float ? v.is_number() : v.type() == type;
  if (!ok) throw ConfigError(std::string("config field '") + field + "' must be " + what);
  return v;
}

fs::path resolve(const fs::path &base, const std::string &p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

double number(const json &j, const char *field, double fallback) {
  if (!j.contains(field)) return fallback;
  return expect(j, field, json::value_t::number_float, "a number").get<double>();
}

std::string text(const json &j, const char *field, const std::string &prefix) {
  if (!j.contains(field)) throw ConfigError("config field '" + prefix + field + "' is required");
  return expect(j, field, json::value_t::string, "a string").get<std::string>();
}

ModelEndpoint endpoint_from(const json &j) {
  if (!j.is_object()) throw ConfigError("config field 'endpoint' must be an object");
  ModelEndpoint e;
  e.base_url = text(j, "base_url", "endpoint.");
  e.model = text(j, "model", "endpoint.");
  if (j.contains("api_key_env")) {
    e.api_key_env = expect(j, "api_key_env", json::value_t::string, "a string").get<std::string>();
    if (!e.api_key_env.empty() && std::getenv(e.api_key_env.c_str()) == nullptr) {
      throw ConfigError("config field 'endpoint.api_key_env' names '" + e.api_key_env +
                        "', which is not set in the environment");
    }
  }
  if (j.contains("api_key")) {
    throw ConfigError("config field 'endpoint.api_key' is not accepted; put the token in an environment "
                      "variable and name it in 'endpoint.api_key_env'");
  }
  e.temperature = number(j, "temperature", e.temperature);
  e.max_tokens = static_cast<int>(number(j, "max_tokens", e.max_tokens));
  e.rate_limit = number(j, "rate", e.rate_limit);
  e.timeout = std::chrono::milliseconds(static_cast<long long>(number(j, "timeout_ms", e.timeout.count())));
  e.max_in_flight = static_cast<int>(number(j, "max_in_flight", e.max_in_flight));
  if (j.contains("retry")) {
    const auto &r = j.at("retry");
    e.retry.max_attempts = static_cast<int>(number(r, "max_attempts", e.retry.max_attempts));
    e.retry.initial_backoff =
        std::chrono::milliseconds(static_cast<long long>(number(r, "initial_backoff_ms", e.retry.initial_backoff.count())));
    e.retry.multiplier = number(r, "multiplier", e.retry.multiplier);
    e.retry.max_backoff =
        std::chrono::milliseconds(static_cast<long long>(number(r, "max_backoff_ms", e.retry.max_backoff.count())));
    if (e.retry.max_attempts < 1) throw ConfigError("config field 'endpoint.retry.max_attempts' must be >= 1");
  }
  if (e.max_tokens < 1) throw ConfigError("config field 'endpoint.max_tokens' must be >= 1");
  if (e.timeout.count() <= 0) throw ConfigError("config field 'endpoint.timeout_ms' must be positive");
  e.validate();
  return e;
}

BiasProfile profile_from(const json &j) {
  if (!j.is_object()) throw ConfigError("config field 'profile' must be an object");
  if (!j.contains("hit_rate") || !j.at("hit_rate").is_array()) {
    throw ConfigError("config field 'profile.hit_rate' must be an array of probabilities");
  }
  BiasProfile p;
  try {
    p.hit_rate = j.at("hit_rate").get<std::vector<double>>();
    if (j.contains("fallback")) p.fallback = j.at("fallback").get<std::vector<double>>();
  } catch (const json::exception &) {
    throw ConfigError("config field 'profile' holds a non-numeric rate");
  }
  if (p.fallback.empty()) p.fallback.assign(p.hit_rate.size(), p.hit_rate.empty() ? 0.0 : 1.0 / p.hit_rate.size());
  p.order_sensitive = j.value("order_sensitive", false);
  try {
    p.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config field 'profile': ") + e.what());
  }
  return p;
}

json endpoint_json(const ModelEndpoint &e) {
  return {{"base_url", e.base_url},
          {"model", e.model},
          {"api_key_env", e.api_key_env},
          {"temperature", e.temperature},
          {"max_tokens", e.max_tokens},
          {"rate", e.rate_limit},
          {"timeout_ms", e.timeout.count()},
          {"max_in_flight", e.max_in_flight},
          {"retry",
           {{"max_attempts", e.retry.max_attempts},
            {"initial_backoff_ms", e.retry.initial_backoff.count()},
            {"multiplier", e.retry.multiplier},
            {"max_backoff_ms", e.retry.max_backoff.count()}}}};
}

}  // namespace

RunOptions RunConfig::run_options() const {
  RunOptions o;
  o.parallelism = parallelism;
  o.template_id = template_id;
  o.variant_rule = variant_rule;
  o.ordering_cap = ordering_cap;
  o.retry_failed = retry_failed;
  return o;
}

json RunConfig::to_json() const {
  json j{{"experiment", to_string(experiment)},
         {"probes", probes.string()},
         {"parallelism", parallelism},
         {"cache_dir", cache_dir.string()},
         {"output", output.string()},
         {"template", template_id},
         {"variant_rule", variant_rule == VariantRule::swap ? "swap" : "rotate"},
         {"ordering_cap", ordering_cap},
         {"retry_failed", retry_failed}};
  if (!demonstrations.empty()) j["demonstrations"] = demonstrations.string();
  if (endpoint) j["endpoint"] = endpoint_json(*endpoint);
  if (profile) {
    j["profile"] = {{"hit_rate", profile->hit_rate},
                    {"fallback", profile->fallback},
                    {"order_sensitive", profile->order_sensitive}};
  }
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()).substr(0, 16); }

RunConfig validate_config(const json &raw, const fs::path &base_dir) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known{"experiment", "probes",       "demonstrations", "endpoint",
                                              "profile",    "seed",         "parallelism",    "cache_dir",
                                              "output",     "template",     "variant_rule",   "ordering_cap",
                                              "retry_failed"};
  for (const auto &[key, _] : raw.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }

  RunConfig c;
  const bool has_endpoint = raw.contains("endpoint") && !raw.at("endpoint").is_null();
  const bool has_profile = raw.contains("profile") && !raw.at("profile").is_null();
  if (has_endpoint && has_profile) {
    throw ConfigError("config fields 'endpoint' and 'profile' are mutually exclusive; supply exactly one model source");
  }
  if (!has_endpoint && !has_profile) {
    throw ConfigError("config needs a model source: supply 'endpoint' or 'profile'");
  }

  if (raw.contains("experiment")) {
    try {
      c.experiment = experiment_kind_from_string(expect(raw, "experiment", json::value_t::string, "a string").get<std::string>());
    } catch (const std::invalid_argument &e) {
      throw ConfigError(std::string("config field 'experiment': ") + e.what());
    }
  }
  c.probes = resolve(base_dir, text(raw, "probes", ""));
  if (raw.contains("demonstrations")) {
    c.demonstrations = resolve(base_dir, expect(raw, "demonstrations", json::value_t::string, "a string").get<std::string>());
  }
  if (c.experiment == ExperimentKind::ordering_sweep && c.demonstrations.empty()) {
    throw ConfigError("config field 'demonstrations' is required for an ordering_sweep");
  }

  if (raw.contains("seed") && !raw.at("seed").is_null()) {
    const auto &seed = raw.at("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
      throw ConfigError("config field 'seed' must be a non-negative integer");
    }
    c.seed = raw.at("seed").get<std::uint64_t>();
  }
  if (has_profile) {
    c.profile = profile_from(raw.at("profile"));
    if (!c.seed) {
      throw ConfigError("config field 'seed' is required with a simulated 'profile': simulated runs must be "
                        "reproducible from their seed");
    }
  } else {
    c.endpoint = endpoint_from(raw.at("endpoint"));
  }

  if (raw.contains("parallelism")) {
    const auto &p = raw.at("parallelism");
    if (!p.is_number_integer()) throw ConfigError("config field 'parallelism' must be an integer");
    if (p.get<long long>() < 1) throw ConfigError("config field 'parallelism' must be >= 1");
    c.parallelism = p.get<std::size_t>();
  }
  c.cache_dir = resolve(base_dir, raw.value("cache_dir", std::string(".posbias-cache")));
  c.output = resolve(base_dir, raw.value("output", std::string("trials.jsonl")));
  c.template_id = raw.value("template", std::string(kDefaultTemplate));
  if (c.template_id != "default" && c.template_id != "plain") {
    throw ConfigError("config field 'template' must be 'default' or 'plain'");
  }
  const auto rule = raw.value("variant_rule", std::string("swap"));
  if (rule == "swap") c.variant_rule = VariantRule::swap;
  else if (rule == "rotate") c.variant_rule = VariantRule::rotate;
  else throw ConfigError("config field 'variant_rule' must be 'swap' or 'rotate'");
  if (raw.contains("ordering_cap")) {
    const auto &cap = raw.at("ordering_cap");
    if (!cap.is_number_integer() || cap.get<long long>() < 1) {
      throw ConfigError("config field 'ordering_cap' must be a positive integer");
    }
    c.ordering_cap = cap.get<std::size_t>();
  }
  c.retry_failed = raw.value("retry_failed", false);
  return c;
}

RunConfig load_config(const fs::path &path) {
  std::string body;
  try {
    body = read_file(path);
  } catch (const std::exception &e) {
    throw ConfigError("cannot read config '" + path.string() + "': " + e.what());
  }
  json raw;
  try {
    raw = json::parse(body);
  } catch (const json::parse_error &e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return validate_config(raw, fs::absolute(path).parent_path());
}

std::unique_ptr<Model> make_model(const RunConfig &config) {
  if (config.profile) return std::make_unique<SimulatedModel>(*config.profile, config.seed.value_or(0));
  if (config.endpoint) return std::make_unique<EndpointModel>(*config.endpoint);
  throw ConfigError("config has no model source");
}

std::vector<Demonstration> read_demonstrations(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open demonstrations '" + path.string() + "'");
  std::vector<Demonstration> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.value("record", "") == "header") continue;
      Demonstration d;
      d.id = j.at("id").get<std::string>();
      d.text = j.at("text").get<std::string>();
      d.image = ModalityAtom::load(AtomKind::image_ref, j.at("image_path").get<std::string>(), path.parent_path());
      out.push_back(std::move(d));
    } catch (const json::exception &e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace posbias
