#include "fixtures.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

#include "posbias/model.hpp"
#include "posbias/runner.hpp"

namespace posbias::testing {

namespace fs = std::filesystem;

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          (std::string(tag) + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path &path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

ProbeItem text_probe(const std::string &id, std::size_t m, std::size_t correct) {
  ProbeItem item;
  item.id = id;
  item.mode = ProbeMode::text_only;
  item.stem = "Which option fits probe " + id + "?";
  std::vector<SlotContent> contents;
  for (std::size_t i = 1; i <= m; ++i) {
    contents.push_back({ModalityAtom::from_text(id + " option " + std::to_string(i)), std::nullopt});
  }
  item.slots = make_slots(std::move(contents));
  item.correct_index = correct;
  return item;
}

std::vector<ProbeItem> text_probes(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<ProbeItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(text_probe("p" + std::to_string(i), m, 1 + gen() % m));
  }
  return out;
}

std::vector<TrialRecord> simulated_audit(std::size_t n, const BiasProfile &profile, std::uint64_t seed) {
  const auto probes = text_probes(n, profile.option_count(), seed);
  SimulatedModel model(profile, seed);
  TrialStore store;
  run_swap_audit(probes, model, store);
  return store.latest();
}

std::vector<fs::path> write_images(const fs::path &dir, std::size_t count, std::string_view prefix) {
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto path = dir / (std::string(prefix) + std::to_string(i) + ".png");
    std::string bytes = "\x89PNG\r\n\x1a\n";
    bytes += std::string(prefix) + "-" + std::to_string(i);
    write_text(path, bytes);
    out.push_back(path);
  }
  return out;
}

std::string completion_body(std::string_view content) {
  return nlohmann::json{{"id", "cmpl-1"},
                        {"object", "chat.completion"},
                        {"choices",
                         {{{"index", 0},
                           {"message", {{"role", "assistant"}, {"content", content}}},
                           {"finish_reason", "stop"}}}}}
      .dump();
}

MockChatServer::MockChatServer(Handler handler) : handler_(std::move(handler)) {
  server_.Post(R"(/v1/chat/completions)", [this](const httplib::Request &req, httplib::Response &res) {
    const int n = ++requests_;
    {
      std::lock_guard lock(mutex_);
      arrivals_.push_back(std::chrono::steady_clock::now());
      auth_.push_back(req.get_header_value("Authorization"));
    }
    handler_(n, req.body, res);
  });
  port_ = server_.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

MockChatServer::~MockChatServer() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

std::vector<std::chrono::steady_clock::time_point> MockChatServer::arrivals() const {
  std::lock_guard lock(mutex_);
  return arrivals_;
}

std::vector<std::string> MockChatServer::authorization_headers() const {
  std::lock_guard lock(mutex_);
  return auth_;
}

}  // namespace posbias::testing
