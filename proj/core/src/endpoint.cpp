#include "posbias/endpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include <httplib.h>

#include "posbias/atomic_file.hpp"

namespace posbias {

std::string_view to_string(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::none:
      return "none";
    case ErrorClass::auth:
      return "auth";
    case ErrorClass::timeout:
      return "timeout";
    case ErrorClass::rate_limited:
      return "rate_limited";
    case ErrorClass::server:
      return "server";
    case ErrorClass::transport:
      return "transport";
    case ErrorClass::http:
      return "http";
    case ErrorClass::wire_format:
      return "wire_format";
    case ErrorClass::config:
      return "config";
  }
  return "none";
}

ErrorClass error_class_from_string(std::string_view name) {
  for (auto cls : {ErrorClass::none, ErrorClass::auth, ErrorClass::timeout, ErrorClass::rate_limited,
                   ErrorClass::server, ErrorClass::transport, ErrorClass::http, ErrorClass::wire_format,
                   ErrorClass::config}) {
    if (to_string(cls) == name) return cls;
  }
  throw DataError("unknown error class '" + std::string(name) + "'");
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  const double raw = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, std::max(0, attempt - 1));
  const double capped = std::min(raw, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

ParsedUrl parse_base_url(const std::string &url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint.base_url '" + url + "' lacks a scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("endpoint.base_url must use http or https, got '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  if (out.origin.size() <= scheme_end + 3) throw ConfigError("endpoint.base_url '" + url + "' lacks a host");
  return out;
}

bool retryable(ErrorClass cls) {
  return cls == ErrorClass::rate_limited || cls == ErrorClass::server || cls == ErrorClass::timeout ||
         cls == ErrorClass::transport;
}

}  // namespace

void ModelEndpoint::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint.base_url is required");
  parse_base_url(base_url);
  if (model.empty()) throw ConfigError("endpoint.model is required");
  if (!(temperature >= 0.0)) throw ConfigError("endpoint.temperature must be >= 0");
  if (!(rate_limit > 0.0)) throw ConfigError("endpoint.rate_limit must be > 0");
  if (max_tokens <= 0) throw ConfigError("endpoint.max_tokens must be > 0");
  if (timeout.count() <= 0) throw ConfigError("endpoint.timeout_ms must be > 0");
  if (max_in_flight <= 0) throw ConfigError("endpoint.max_in_flight must be > 0");
  if (retry.max_attempts < 1) throw ConfigError("endpoint.retry.max_attempts must be >= 1");
  if (!(retry.multiplier >= 1.0)) throw ConfigError("endpoint.retry.multiplier must be >= 1");
}

nlohmann::json ModelEndpoint::decoding() const {
  return {{"temperature", temperature}, {"max_tokens", max_tokens}};
}

RateLimiter::RateLimiter(double per_second) {
  if (!(per_second > 0.0)) throw std::invalid_argument("rate limit must be positive");
  using namespace std::chrono;
  if (per_second >= 1.0) {
    capacity_ = static_cast<std::size_t>(std::floor(per_second));
    window_ = seconds(1);
  } else {
    capacity_ = 1;
    window_ = duration_cast<steady_clock::duration>(duration<double>(1.0 / per_second));
  }
}

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    while (!starts_.empty() && now - starts_.front() >= window_) starts_.pop_front();
    if (starts_.size() < capacity_) {
      starts_.push_back(now);
      return;
    }
    const auto wake = starts_.front() + window_;
    lock.unlock();
    std::this_thread::sleep_until(wake);
    lock.lock();
  }
}

nlohmann::json build_chat_request(const Prompt &prompt, const ModelEndpoint &endpoint) {
  auto content = nlohmann::json::array();
  for (const auto &part : prompt.parts) {
    if (part.kind == PromptPart::Kind::text) {
      content.push_back({{"type", "text"}, {"text", part.text}});
      continue;
    }
    const auto bytes = read_file(part.path);
    const auto encoded =
        base64_encode({reinterpret_cast<const std::uint8_t *>(bytes.data()), bytes.size()});
    content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", "data:" + part.media_type + ";base64," + encoded}}}});
  }
  return {{"model", endpoint.model},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::move(content)}}})},
          {"temperature", endpoint.temperature},
          {"max_tokens", endpoint.max_tokens},
          {"stream", false}};
}

std::string extract_reply(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error &e) {
    throw EndpointError(ErrorClass::wire_format, std::string("response body is not JSON: ") + e.what());
  }
  try {
    const auto &message = j.at("choices").at(0).at("message");
    const auto &content = message.at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string text;
      for (const auto &part : content) {
        if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
      }
      return text;
    }
  } catch (const nlohmann::json::exception &e) {
    throw EndpointError(ErrorClass::wire_format, std::string("response lacks choices[0].message.content: ") + e.what());
  }
  throw EndpointError(ErrorClass::wire_format, "choices[0].message.content has an unexpected type");
}

ChatClient::ChatClient(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)), limiter_(endpoint_.rate_limit) {
  endpoint_.validate();
  const auto url = parse_base_url(endpoint_.base_url);
  origin_ = url.origin;
  path_ = url.path + "/chat/completions";
  if (!endpoint_.api_key_env.empty()) {
    if (const char *token = std::getenv(endpoint_.api_key_env.c_str())) bearer_ = token;
  }
}

QueryResult ChatClient::query(const Prompt &prompt) {
  const auto body = build_chat_request(prompt, endpoint_).dump();

  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < endpoint_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    ChatClient *self;
    ~Release() {
      {
        std::lock_guard lock(self->slots_mutex_);
        --self->in_flight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  const auto timeout_s = endpoint_.timeout.count() / 1000;
  const auto timeout_us = (endpoint_.timeout.count() % 1000) * 1000;

  ErrorClass last_class = ErrorClass::none;
  std::string last_message;
  for (int attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
    limiter_.acquire();
    httplib::Client cli(origin_);
    cli.set_connection_timeout(timeout_s, timeout_us);
    cli.set_read_timeout(timeout_s, timeout_us);
    cli.set_write_timeout(timeout_s, timeout_us);
    httplib::Headers headers;
    if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);

    std::chrono::milliseconds retry_after{0};
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_class = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                       ? ErrorClass::timeout
                       : ErrorClass::transport;
      last_message = "request failed: " + httplib::to_string(err);
    } else if (res->status == 200) {
      try {
        return {extract_reply(res->body), attempt};
      } catch (const EndpointError &e) {
        throw EndpointError(e.error_class(), e.what(), attempt);
      }
    } else {
      last_message = "HTTP " + std::to_string(res->status);
      if (res->status == 401 || res->status == 403) {
        throw EndpointError(ErrorClass::auth, last_message + " (check " + endpoint_.api_key_env + ")", attempt);
      }
      if (res->status == 429) {
        last_class = ErrorClass::rate_limited;
        if (res->has_header("Retry-After")) {
          try {
            retry_after = std::chrono::seconds(std::stol(res->get_header_value("Retry-After")));
          } catch (const std::exception &) {
          }
        }
      } else if (res->status >= 500) {
        last_class = ErrorClass::server;
      } else {
        throw EndpointError(ErrorClass::http, last_message, attempt);
      }
    }
    if (!retryable(last_class) || attempt == endpoint_.retry.max_attempts) {
      throw EndpointError(last_class, last_message + " after " + std::to_string(attempt) + " attempt(s)", attempt);
    }
    const auto delay = std::min(std::max(endpoint_.retry.backoff(attempt), retry_after), endpoint_.retry.max_backoff);
    std::this_thread::sleep_for(delay);
  }
  throw EndpointError(last_class, last_message, endpoint_.retry.max_attempts);
}

}  // namespace posbias
