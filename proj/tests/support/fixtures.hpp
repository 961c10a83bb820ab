#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "posbias/probe.hpp"
#include "posbias/simulate.hpp"
#include "posbias/store.hpp"

namespace posbias::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "posbias");
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  [[nodiscard]] const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path &path, std::string_view content);

/// Text-only probe "<id>" with M distinct text options, correct at `correct`.
ProbeItem text_probe(const std::string &id, std::size_t m, std::size_t correct);
std::vector<ProbeItem> text_probes(std::size_t n, std::size_t m, std::uint64_t seed = 0);

/// In-memory swap audit of `n` text probes against a simulated profile.
std::vector<TrialRecord> simulated_audit(std::size_t n, const BiasProfile &profile, std::uint64_t seed);

/// Fake image files with distinct bytes; returns their paths.
std::vector<std::filesystem::path> write_images(const std::filesystem::path &dir, std::size_t count,
                                                std::string_view prefix = "img");

/// Body of a successful chat completion carrying `content`.
std::string completion_body(std::string_view content);

/// Local chat completions server. The handler sees the 1-based request
/// number and the parsed request body.
class MockChatServer {
 public:
  using Handler = std::function<void(int request_no, const std::string &body, httplib::Response &res)>;

  explicit MockChatServer(Handler handler);
  ~MockChatServer();
  MockChatServer(const MockChatServer &) = delete;
  MockChatServer &operator=(const MockChatServer &) = delete;

  [[nodiscard]] std::string base_url() const;
  [[nodiscard]] int requests() const { return requests_.load(); }
  [[nodiscard]] std::vector<std::chrono::steady_clock::time_point> arrivals() const;
  [[nodiscard]] std::vector<std::string> authorization_headers() const;

 private:
  httplib::Server server_;
  Handler handler_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> requests_{0};
  mutable std::mutex mutex_;
  std::vector<std::chrono::steady_clock::time_point> arrivals_;
  std::vector<std::string> auth_;
};

}  // namespace posbias::testing
