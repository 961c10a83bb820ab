#include "posbias/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "posbias/hash.hpp"

namespace posbias {

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::swap_audit:
      return "swap_audit";
    case ExperimentKind::ordering_sweep:
      return "ordering_sweep";
    case ExperimentKind::keyframe_placement:
      return "keyframe_placement";
    case ExperimentKind::rag_placement:
      return "rag_placement";
  }
  return "swap_audit";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
  for (auto k : {ExperimentKind::swap_audit, ExperimentKind::ordering_sweep, ExperimentKind::keyframe_placement,
                 ExperimentKind::rag_placement}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

RunStats &RunStats::operator+=(const RunStats &other) {
  trials += other.trials;
  model_calls += other.model_calls;
  cache_hits += other.cache_hits;
  resumed += other.resumed;
  failures += other.failures;
  return *this;
}

SimulatedModel::SimulatedModel(BiasProfile profile, std::uint64_t seed) : profile_(std::move(profile)), seed_(seed) {
  profile_.validate();
  const nlohmann::json desc{{"hit_rate", profile_.hit_rate},
                            {"fallback", profile_.fallback},
                            {"order_sensitive", profile_.order_sensitive},
                            {"seed", seed_}};
  id_ = "simulated:" + sha256_hex(desc.dump()).substr(0, 16);
}

ModelReply SimulatedModel::respond(const TrialInput &input) {
  const auto &key = profile_.order_sensitive ? input.trial_key : input.item_key;
  return {simulate_response(input.variant, profile_, seed_, key), 1};
}

std::string EndpointModel::id() const {
  return "endpoint:" + client_.endpoint().model + "@" + client_.endpoint().base_url;
}

ModelReply EndpointModel::respond(const TrialInput &input) {
  auto result = client_.query(input.prompt);
  return {std::move(result.text), result.attempts};
}

std::string trial_cache_key(const Model &model, const Prompt &prompt) {
  std::string material = model.id();
  material.push_back('\0');
  material += prompt.canonical_bytes();
  material.push_back('\0');
  material += model.decoding().dump();
  return sha256_hex(material).substr(0, 32);
}

namespace {

TrialRecord make_record(const PlannedTrial &t, const std::string &cache_key, const std::string &model_id) {
  TrialRecord r;
  r.experiment = std::string(to_string(t.experiment));
  r.parent_id = t.parent_id;
  r.variant_key = t.variant_key;
  r.variant_index = t.variant_index;
  r.option_count = t.variant.slots.size();
  r.correct_index = t.variant.correct_index;
  r.correct_label = t.variant.correct_label();
  r.cache_key = cache_key;
  r.model_id = model_id;
  return r;
}

void fill_outcome(TrialRecord &r, const PlannedTrial &t, const std::string &raw, ErrorClass cls,
                  const std::string &message) {
  r.raw_response = raw;
  r.error_class = cls;
  r.error_message = message;
  r.pick.reset();
  r.pick_index = 0;
  r.correct = false;
  if (cls != ErrorClass::none) return;
  const auto labels = t.variant.labels();
  r.pick = parse_answer(raw, labels, t.answer_mode);
  if (r.pick) {
    r.pick_index = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), *r.pick) - labels.begin()) + 1;
    r.correct = r.pick_index == r.correct_index;
  }
}

}  // namespace

RunStats execute_trials(std::vector<PlannedTrial> trials, Model &model, TrialStore &store, const RunOptions &options) {
  RunStats stats;
  stats.trials = trials.size();
  const auto model_id = model.id();

  std::vector<std::string> keys(trials.size());
  std::map<std::string, std::vector<std::size_t>> pending;  // cache key -> trials
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto &t = trials[i];
    keys[i] = trial_cache_key(model, t.prompt);
    const auto usable = [&](bool failed) { return !(failed && options.retry_failed); };

    if (auto existing = store.find_trial(t.parent_id, t.variant_key);
        existing && existing->cache_key == keys[i] && usable(existing->failed())) {
      ++stats.resumed;
      if (existing->failed()) ++stats.failures;
      continue;
    }
    std::optional<CachedResponse> cached;
    if (auto hit = store.find_by_cache_key(keys[i]); hit && usable(hit->failed())) {
      cached = CachedResponse{hit->cache_key, hit->model_id, hit->raw_response, hit->error_class, hit->error_message,
                              hit->attempts};
    } else if (options.cache) {
      if (auto c = options.cache->find(keys[i]); c && usable(c->error_class != ErrorClass::none)) cached = c;
    }
    if (cached && !pending.count(keys[i])) {
      auto record = make_record(t, keys[i], model_id);
      fill_outcome(record, t, cached->raw_response, cached->error_class, cached->error_message);
      record.from_cache = true;
      if (record.failed()) ++stats.failures;
      ++stats.cache_hits;
      store.append(std::move(record));
      continue;
    }
    pending[keys[i]].push_back(i);
  }

  std::vector<const std::pair<const std::string, std::vector<std::size_t>> *> work;
  work.reserve(pending.size());
  for (const auto &entry : pending) work.push_back(&entry);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex stats_mutex;
  std::exception_ptr fatal;

  const auto worker = [&] {
    while (!abort.load()) {
      const auto w = next.fetch_add(1);
      if (w >= work.size()) return;
      const auto &[key, members] = *work[w];
      const auto &lead = trials[members.front()];

      std::string raw;
      ErrorClass cls = ErrorClass::none;
      std::string message;
      int attempts = 0;
      const auto start = std::chrono::steady_clock::now();
      try {
        TrialInput input{lead.variant, lead.prompt, lead.parent_id + "#" + lead.variant_key, lead.item_key};
        auto reply = model.respond(input);
        raw = std::move(reply.text);
        attempts = reply.attempts;
      } catch (const EndpointError &e) {
        cls = e.error_class();
        message = e.what();
        attempts = e.attempts();
      } catch (...) {
        std::lock_guard lock(stats_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
        return;
      }
      const double latency =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

      if (options.cache) options.cache->put({key, model_id, raw, cls, message, attempts});
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto &t = trials[members[m]];
        auto record = make_record(t, key, model_id);
        fill_outcome(record, t, raw, cls, message);
        record.attempts = m == 0 ? attempts : 0;
        record.latency_ms = m == 0 ? latency : 0.0;
        record.from_cache = m != 0;
        store.append(std::move(record));
      }
      std::lock_guard lock(stats_mutex);
      ++stats.model_calls;
      stats.cache_hits += members.size() - 1;
      if (cls != ErrorClass::none) stats.failures += members.size();
    }
  };

  const auto threads = std::max<std::size_t>(1, std::min(options.parallelism, work.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);
  return stats;
}

namespace {

PlannedTrial plan(ExperimentKind kind, const ProbeItem &variant, std::string variant_key, std::size_t index,
                  const RunOptions &options, std::span<const Demonstration> demos = {}) {
  PlannedTrial t;
  t.experiment = kind;
  t.parent_id = variant.id;
  t.variant_key = std::move(variant_key);
  t.variant_index = index;
  t.prompt = render_prompt(variant, options.template_id, demos);
  t.item_key = variant.id + "#" + t.variant_key;
  t.answer_mode = variant.mode == ProbeMode::video_placement ? AnswerMode::yes_no : AnswerMode::label;
  t.variant = variant;
  return t;
}

}  // namespace

RunStats run_swap_audit(std::span<const ProbeItem> probes, Model &model, TrialStore &store, const RunOptions &options) {
  std::vector<PlannedTrial> trials;
  for (const auto &probe : probes) {
    if (probe.mode == ProbeMode::video_placement || probe.mode == ProbeMode::rag_placement) {
      throw std::invalid_argument("swap audit expects multiple-choice probes; '" + probe.id + "' is " +
                                  std::string(to_string(probe.mode)));
    }
    const auto set = swap_variants(probe, options.variant_rule);
    for (std::size_t k = 0; k < set.variants.size(); ++k) {
      trials.push_back(plan(ExperimentKind::swap_audit, set.variants[k], "k=" + std::to_string(k + 1), k + 1, options));
    }
  }
  return execute_trials(std::move(trials), model, store, options);
}

std::vector<double> run_ordering_sweep(std::span<const Demonstration> demonstrations,
                                       std::span<const ProbeItem> probes, Model &model, TrialStore &store,
                                       const RunOptions &options, RunStats *stats) {
  if (probes.empty()) throw std::invalid_argument("ordering sweep needs at least one evaluation probe");
  const auto orderings = enumerate_orderings(demonstrations.size(), options.ordering_cap);
  std::vector<PlannedTrial> trials;
  trials.reserve(orderings.size() * probes.size());
  for (const auto &ordering : orderings) {
    const auto demos = apply_ordering(demonstrations, ordering);
    for (const auto &probe : probes) {
      probe.validate();
      auto t = plan(ExperimentKind::ordering_sweep, probe, "rank=" + std::to_string(ordering.rank), ordering.rank,
                    options, demos);
      t.item_key = probe.id;
      trials.push_back(std::move(t));
    }
  }
  auto run = execute_trials(std::move(trials), model, store, options);
  if (stats) *stats += run;

  std::vector<double> correct(orderings.size(), 0.0);
  std::vector<double> total(orderings.size(), 0.0);
  for (const auto &r : store.latest()) {
    if (r.experiment != to_string(ExperimentKind::ordering_sweep) || r.variant_index >= orderings.size()) continue;
    total[r.variant_index] += 1.0;
    if (r.correct) correct[r.variant_index] += 1.0;
  }
  std::vector<double> scores(orderings.size(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = total[i] > 0 ? correct[i] / total[i] : 0.0;
  return scores;
}

RunStats run_placement(std::span<const ProbeItem> probes, Model &model, TrialStore &store, const RunOptions &options) {
  std::vector<PlannedTrial> trials;
  for (const auto &probe : probes) {
    probe.validate();
    if (probe.mode == ProbeMode::video_placement) {
      std::size_t index = 1;
      for (auto placement : kAllKeyframePlacements) {
        trials.push_back(plan(ExperimentKind::keyframe_placement, place_keyframes(probe, placement),
                              std::string(to_string(placement)), index++, options));
      }
    } else if (probe.mode == ProbeMode::rag_placement) {
      for (std::size_t p = 1; p <= probe.rag->images.size(); ++p) {
        trials.push_back(
            plan(ExperimentKind::rag_placement, place_rag_image(probe, p), "pos=" + std::to_string(p), p, options));
      }
    } else {
      throw std::invalid_argument("placement runs need video or RAG probes; '" + probe.id + "' is " +
                                  std::string(to_string(probe.mode)));
    }
  }
  return execute_trials(std::move(trials), model, store, options);
}

}  // namespace posbias
