#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "posbias/error.hpp"
#include "posbias/prompt.hpp"

namespace posbias {

/// Failure classes recorded on trial records. `none` marks success.
enum class ErrorClass { none, auth, timeout, rate_limited, server, transport, http, wire_format, config };

std::string_view to_string(ErrorClass cls);
ErrorClass error_class_from_string(std::string_view name);

/// Model call failure, carrying its class and how many attempts were made.
class EndpointError : public Error {
 public:
  EndpointError(ErrorClass cls, const std::string &what, int attempts = 1)
      : Error(what), class_(cls), attempts_(attempts) {}

  [[nodiscard]] ErrorClass error_class() const { return class_; }
  [[nodiscard]] int attempts() const { return attempts_; }

 private:
  ErrorClass class_;
  int attempts_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  /// Delay before attempt `attempt + 1`, given `attempt` >= 1 failures so far.
  [[nodiscard]] std::chrono::milliseconds backoff(int attempt) const;
};

struct ModelEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the bearer token
  double temperature = 0.0;
  int max_tokens = 16;
  double rate_limit = 5.0;  // requests per second
  std::chrono::milliseconds timeout{60000};
  int max_in_flight = 4;
  RetryPolicy retry;

  /// Throws ConfigError on temperature < 0, rate_limit <= 0, bad URL, etc.
  void validate() const;
  /// Decoding parameters that take part in cache keys.
  [[nodiscard]] nlohmann::json decoding() const;
};

/// Caps request starts at `per_second` within any sliding one-second window.
/// Thread-safe; share one instance per endpoint.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  std::size_t capacity_;
  std::chrono::steady_clock::duration window_;
  std::mutex mutex_;
  std::deque<std::chrono::steady_clock::time_point> starts_;
};

/// OpenAI-compatible chat completions request body for a prompt. Images are
/// inlined as base64 data URLs.
nlohmann::json build_chat_request(const Prompt &prompt, const ModelEndpoint &endpoint);

/// First assistant message text of a chat completions response body.
/// Throws EndpointError(wire_format) on anything else.
std::string extract_reply(std::string_view body);

struct QueryResult {
  std::string text;
  int attempts = 1;
};

/// Wire client for one endpoint. query() is safe to call concurrently; at
/// most max_in_flight requests are outstanding at once.
class ChatClient {
 public:
  explicit ChatClient(ModelEndpoint endpoint);

  /// Sends the prompt, retrying 429/5xx/timeouts/connection failures with
  /// capped exponential backoff. Throws EndpointError on final failure.
  QueryResult query(const Prompt &prompt);

  [[nodiscard]] const ModelEndpoint &endpoint() const { return endpoint_; }

 private:
  ModelEndpoint endpoint_;
  std::string origin_;
  std::string path_;
  std::string bearer_;
  RateLimiter limiter_;
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
};

}  // namespace posbias
