#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posbias/answer.hpp"
#include "posbias/model.hpp"
#include "posbias/store.hpp"
#include "posbias/variants.hpp"

namespace posbias {

enum class ExperimentKind { swap_audit, ordering_sweep, keyframe_placement, rag_placement };

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view name);

struct RunOptions {
  std::size_t parallelism = 1;
  std::string template_id{kDefaultTemplate};
  VariantRule variant_rule = VariantRule::swap;
  std::size_t ordering_cap = kDefaultOrderingCap;
  /// Re-issue calls whose cached outcome is a failure.
  bool retry_failed = false;
  /// Optional cache shared across stores; the store itself always serves as one.
  ResponseCache *cache = nullptr;
};

struct RunStats {
  std::size_t trials = 0;
  std::size_t model_calls = 0;
  std::size_t cache_hits = 0;  // answered from the store or response cache
  std::size_t resumed = 0;     // already present in the store, nothing appended
  std::size_t failures = 0;    // records (new or resumed) carrying an error class

  RunStats &operator+=(const RunStats &other);
};

/// Digest of (model id, rendered prompt bytes, decoding params).
std::string trial_cache_key(const Model &model, const Prompt &prompt);

/// One planned trial, before execution.
struct PlannedTrial {
  ExperimentKind experiment = ExperimentKind::swap_audit;
  std::string parent_id;
  std::string variant_key;
  std::size_t variant_index = 0;
  ProbeItem variant;
  Prompt prompt;
  std::string item_key;
  AnswerMode answer_mode = AnswerMode::label;
};

/// Runs planned trials on a bounded worker pool. Trials already in the store
/// (same trial identity and cache key) are skipped; cached responses are
/// reused without a model call; each distinct cache key is sent to the model
/// at most once. Failures become error-class records, never exceptions.
RunStats execute_trials(std::vector<PlannedTrial> trials, Model &model, TrialStore &store, const RunOptions &options);

/// All M variants of every probe, tagged "k=<position>".
RunStats run_swap_audit(std::span<const ProbeItem> probes, Model &model, TrialStore &store,
                        const RunOptions &options = {});

/// Every ordering of the demonstrations, prepended to every evaluation probe,
/// tagged "rank=<r>". Returns one accuracy per ordering, indexed by rank.
std::vector<double> run_ordering_sweep(std::span<const Demonstration> demonstrations,
                                       std::span<const ProbeItem> probes, Model &model, TrialStore &store,
                                       const RunOptions &options = {}, RunStats *stats = nullptr);

/// Video probes: front/middle/back. RAG probes: relevant image at 1..K.
RunStats run_placement(std::span<const ProbeItem> probes, Model &model, TrialStore &store,
                       const RunOptions &options = {});

}  // namespace posbias
