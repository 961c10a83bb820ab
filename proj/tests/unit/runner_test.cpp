#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "posbias/atomic_file.hpp"
#include "posbias/ingest.hpp"
#include "posbias/metrics.hpp"
#include "posbias/runner.hpp"
#include "posbias/variants.hpp"

using namespace posbias;
using namespace std::chrono_literals;
using posbias::testing::completion_body;
using posbias::testing::MockChatServer;
using posbias::testing::TempDir;
using posbias::testing::text_probe;
using posbias::testing::text_probes;
using posbias::testing::write_images;

namespace {

const auto kUShape = BiasProfile::with_uniform_fallback({0.8, 0.3, 0.3, 0.9});

/// Model that counts calls and answers "A".
class CountingModel final : public Model {
 public:
  [[nodiscard]] std::string id() const override { return "counting"; }
  [[nodiscard]] nlohmann::json decoding() const override { return nlohmann::json::object(); }
  ModelReply respond(const TrialInput &) override {
    ++calls;
    return {"A", 1};
  }
  std::atomic<int> calls{0};
};

std::vector<nlohmann::json> canonical(const TrialStore &store) {
  std::vector<nlohmann::json> out;
  for (const auto &r : store.latest()) out.push_back(r.canonical_json());
  return out;
}

ProbeItem video_item(const TempDir &dir, const std::string &id) {
  const auto frames = write_images(dir.path(), 15, id + "-f");
  FrameManifest m;
  m.fps = 3;
  m.caption = "waving";
  for (const auto &f : frames) m.frames.push_back(ModalityAtom::load(AtomKind::frame_seq_ref, f, dir.path()));
  m.key_range = {0, 3};
  return make_video_item(id, {m, video_question(m.caption)});
}

std::vector<ProbeItem> rag_items(const TempDir &dir, std::size_t n) {
  const auto images = write_images(dir.path(), n + 6, "rag");
  std::vector<ModalityAtom> pool;
  for (const auto &p : images) pool.push_back(ModalityAtom::load(AtomKind::image_ref, p, dir.path()));
  std::vector<ProbeItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto item = text_probe("r" + std::to_string(i), 4, 1 + i % 4);
    item.anchor = pool[i];
    out.push_back(build_rag_probe(item, pool, 3, 5));
  }
  return out;
}

}  // namespace

TEST(SwapAudit, CountsAndWarmRerun) {
  TempDir dir;
  const auto probes = text_probes(10, 4, 1);
  SimulatedModel model(kUShape, 3);
  auto store = TrialStore::open(dir / "trials.jsonl");
  const auto first = run_swap_audit(probes, model, *store);
  EXPECT_EQ(first.trials, 40u);
  EXPECT_EQ(first.model_calls, 40u);
  EXPECT_EQ(store->size(), 40u);
  const auto digest = store->canonical_digest();

  const auto second = run_swap_audit(probes, model, *store);
  EXPECT_EQ(second.model_calls, 0u);
  EXPECT_EQ(second.resumed, 40u);
  EXPECT_EQ(store->size(), 40u);

  store.reset();
  auto reopened = TrialStore::open(dir / "trials.jsonl");
  EXPECT_EQ(reopened->size(), 40u);
  EXPECT_EQ(reopened->canonical_digest(), digest);
}

TEST(SwapAudit, RecordsAreConsistent) {
  const auto records = posbias::testing::simulated_audit(25, kUShape, 9);
  ASSERT_EQ(records.size(), 100u);
  for (const auto &r : records) {
    EXPECT_EQ(r.variant_key, "k=" + std::to_string(r.variant_index));
    EXPECT_EQ(r.correct_index, r.variant_index);
    EXPECT_EQ(r.correct, r.pick_index == r.correct_index && r.parsed());
    if (!r.parsed()) EXPECT_FALSE(r.correct);
  }
}

TEST(SwapAudit, SharedResponseCacheServesNewStore) {
  TempDir dir;
  const auto probes = text_probes(5, 4, 2);
  CountingModel model;
  auto cache = ResponseCache::open(dir / "cache");
  RunOptions options;
  options.cache = cache.get();
  TrialStore a;
  run_swap_audit(probes, model, a, options);
  EXPECT_EQ(model.calls, 20);

  auto reopened_cache = ResponseCache::open(dir / "cache");
  options.cache = reopened_cache.get();
  TrialStore b;
  const auto stats = run_swap_audit(probes, model, b, options);
  EXPECT_EQ(model.calls, 20);
  EXPECT_EQ(stats.cache_hits, 20u);
  EXPECT_EQ(canonical(a), canonical(b));
}

TEST(SwapAudit, IdenticalPromptsShareOneCall) {
  const std::vector<ProbeItem> probes{text_probe("same", 3, 1), text_probe("same", 3, 1)};
  CountingModel model;
  TrialStore store;
  auto renamed = probes;
  renamed[1].id = "other";
  renamed[1].stem = renamed[0].stem;
  renamed[1].slots = renamed[0].slots;
  run_swap_audit(renamed, model, store);
  EXPECT_EQ(model.calls, 3);
  EXPECT_EQ(store.size(), 6u);
}

TEST(SwapAudit, ParallelMatchesSerial) {
  const auto probes = text_probes(30, 4, 4);
  SimulatedModel model(kUShape, 8);
  TrialStore serial, parallel;
  run_swap_audit(probes, model, serial);
  RunOptions options;
  options.parallelism = 4;
  run_swap_audit(probes, model, parallel, options);
  EXPECT_EQ(serial.canonical_digest(), parallel.canonical_digest());
}

TEST(SwapAudit, EndpointFailuresAreRecordedAndCached) {
  TempDir dir;
  std::atomic<bool> healthy{false};
  MockChatServer server([&](int, const std::string &, httplib::Response &res) {
    if (!healthy) {
      res.status = 403;
      return;
    }
    res.set_content(completion_body("The answer is B"), "application/json");
  });
  ModelEndpoint e;
  e.base_url = server.base_url();
  e.model = "m";
  e.rate_limit = 1000;
  e.retry.initial_backoff = 1ms;
  EndpointModel model(e);
  const auto probes = text_probes(3, 2, 5);

  auto store = TrialStore::open(dir / "t.jsonl");
  const auto first = run_swap_audit(probes, model, *store);
  EXPECT_EQ(first.failures, 6u);
  EXPECT_EQ(store->size(), 6u);
  for (const auto &r : store->latest()) {
    EXPECT_EQ(r.error_class, ErrorClass::auth);
    EXPECT_FALSE(r.correct);
  }
  const int calls_after_first = server.requests();

  const auto rerun = run_swap_audit(probes, model, *store);
  EXPECT_EQ(server.requests(), calls_after_first);
  EXPECT_EQ(rerun.failures, 6u);

  healthy = true;
  RunOptions retry;
  retry.retry_failed = true;
  const auto third = run_swap_audit(probes, model, *store, retry);
  EXPECT_EQ(third.failures, 0u);
  EXPECT_EQ(third.model_calls, 6u);
  for (const auto &r : store->latest()) {
    EXPECT_EQ(r.error_class, ErrorClass::none);
    EXPECT_EQ(r.pick, "B");
  }
}

TEST(Store, TornTrailingLineIsDropped) {
  TempDir dir;
  const auto path = dir / "t.jsonl";
  {
    auto store = TrialStore::open(path);
    SimulatedModel model(kUShape, 1);
    run_swap_audit(text_probes(2, 4, 1), model, *store);
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"parent_id\": \"p9\", \"varia";
  }
  auto store = TrialStore::open(path);
  EXPECT_EQ(store->size(), 8u);
  SimulatedModel model(kUShape, 1);
  run_swap_audit(text_probes(3, 4, 1), model, *store);
  auto reopened = TrialStore::open(path);
  EXPECT_EQ(reopened->size(), reopened->latest().size());
}

TEST(Store, CorruptInteriorLineIsAnError) {
  TempDir dir;
  const auto path = dir / "t.jsonl";
  {
    auto store = TrialStore::open(path);
    SimulatedModel model(kUShape, 1);
    run_swap_audit(text_probes(1, 4, 1), model, *store);
  }
  std::string body = read_file(path);
  body.insert(body.find('\n') + 1, "garbage\n");
  posbias::testing::write_text(path, body);
  EXPECT_THROW(TrialStore::open(path), DataError);
}

TEST(Store, RecordJsonRoundTrip) {
  for (const auto &r : posbias::testing::simulated_audit(3, kUShape, 2)) {
    EXPECT_EQ(TrialRecord::from_json(r.to_json()), r);
  }
}

TEST(OrderingSweep, FourShotsTwentyFourScores) {
  TempDir dir;
  const auto images = write_images(dir.path(), 4, "demo");
  std::vector<Demonstration> demos;
  for (std::size_t i = 0; i < 4; ++i) {
    demos.push_back({"d" + std::to_string(i), ModalityAtom::load(AtomKind::image_ref, images[i], dir.path()),
                     "example " + std::to_string(i)});
  }
  const auto probes = text_probes(20, 4, 6);
  SimulatedModel insensitive(kUShape, 4);
  TrialStore store;
  const auto scores = run_ordering_sweep(demos, probes, insensitive, store);
  ASSERT_EQ(scores.size(), 24u);
  for (double s : scores) EXPECT_DOUBLE_EQ(s, scores.front());
  EXPECT_EQ(ordering_scores(store.latest()), scores);

  auto sensitive_profile = kUShape;
  sensitive_profile.order_sensitive = true;
  SimulatedModel sensitive(sensitive_profile, 4);
  TrialStore other;
  const auto varied = run_ordering_sweep(demos, probes, sensitive, other);
  EXPECT_GT(*std::max_element(varied.begin(), varied.end()), *std::min_element(varied.begin(), varied.end()));

  const std::vector<Demonstration> single{demos[0]};
  TrialStore one;
  EXPECT_EQ(run_ordering_sweep(single, probes, insensitive, one).size(), 1u);
}

TEST(Placement, VideoThreeTrialsPerProbe) {
  TempDir dir;
  std::vector<ProbeItem> probes;
  for (int i = 0; i < 5; ++i) probes.push_back(video_item(dir, "v" + std::to_string(i)));
  SimulatedModel model(BiasProfile::with_uniform_fallback({0.2, 0.5, 0.9}), 2);
  TrialStore store;
  const auto stats = run_placement(probes, model, store);
  EXPECT_EQ(stats.trials, 15u);
  std::map<std::string, int> tags;
  for (const auto &r : store.latest()) ++tags[r.variant_key];
  EXPECT_EQ(tags, (std::map<std::string, int>{{"back", 5}, {"front", 5}, {"middle", 5}}));

  TrialStore again;
  run_placement(probes, model, again);
  EXPECT_EQ(again.canonical_digest(), store.canonical_digest());
}

TEST(Placement, RagFourTrialsPerProbe) {
  TempDir dir;
  const auto probes = rag_items(dir, 6);
  SimulatedModel model(BiasProfile::with_uniform_fallback({0.5, 0.5, 0.5, 0.5}), 2);
  TrialStore store;
  EXPECT_EQ(run_placement(probes, model, store).trials, 24u);
  for (const auto &r : store.latest()) EXPECT_EQ(r.variant_key, "pos=" + std::to_string(r.variant_index));
}
