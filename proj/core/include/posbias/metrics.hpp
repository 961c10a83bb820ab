#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "posbias/error.hpp"
#include "posbias/store.hpp"

namespace posbias {

/// Swap-audit groups with missing variants.
class IncompleteGroupsError : public DataError {
 public:
  IncompleteGroupsError(std::vector<std::pair<std::string, std::size_t>> missing);
  [[nodiscard]] const std::vector<std::pair<std::string, std::size_t>> &missing() const { return missing_; }

 private:
  std::vector<std::pair<std::string, std::size_t>> missing_;
};

/// Per-position counts over a complete swap audit.
///
/// correct[i]: trials answered correctly with pick i+1 (equivalently, with
/// the correct answer at i+1). picks[i]: trials whose pick was i+1.
/// sum(picks) + unparseable == M * N.
struct PositionTally {
  std::size_t option_count = 0;  // M
  std::size_t parents = 0;       // N
  std::vector<std::size_t> correct;
  std::vector<std::size_t> picks;
  std::size_t unparseable = 0;  // includes failed trials
  std::size_t failed = 0;
};

/// Swap-audit records of `records` grouped by parent (latest record per
/// trial wins). Throws IncompleteGroupsError listing (parent, k) pairs that
/// are missing, DataError on inconsistent option counts.
PositionTally tally(std::span<const TrialRecord> records);
PositionTally tally(const TrialStore &store);

/// sum(C_i) / (M * N). Throws DataError when N = 0.
double accuracy(const PositionTally &tally);

/// Fraction of parents answered correctly under all M variants.
double circular_accuracy(std::span<const TrialRecord> records);

struct PiaBreakdown {
  double value = 0.0;
  std::vector<double> weight;  // C_i / Pr_i (0 when Pr_i = 0)
  std::vector<double> term;    // weight_i * C_i / N
};

/// Position-Invariant Accuracy: (1/M) * sum_i (C_i / Pr_i) * (C_i / N).
/// A position never picked contributes 0. Throws DataError when N = 0.
PiaBreakdown pia(const PositionTally &tally);

/// The same metric after dropping parents solved under all M variants.
/// Returns nullopt when every parent is dropped.
std::optional<PiaBreakdown> pia_excluding_all_correct(std::span<const TrialRecord> records);

struct PreferenceHistogram {
  std::vector<std::size_t> correct_by_position;
  std::size_t excluded_parents = 0;
  std::size_t remaining_parents = 0;
};

/// Correct answers by position of the correct option, after excluding
/// parents answered correctly in all M variants.
PreferenceHistogram preference_histogram(std::span<const TrialRecord> records);

struct PlacementScore {
  std::string tag;
  std::size_t index = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct PlacementDelta {
  std::string reference;
  std::string other;
  double delta = 0.0;  // accuracy(reference) - accuracy(other)
};

struct PlacementComparison {
  std::string experiment;
  std::vector<PlacementScore> scores;  // by placement index
  std::vector<PlacementDelta> deltas;  // last placement against each other
};

/// Accuracy per placement tag over complete placement groups, with deltas of
/// the last placement (back, or the last RAG position) against the others.
PlacementComparison placement_comparison(std::span<const TrialRecord> records);

/// Accuracy per ordering rank of an ordering sweep.
std::vector<double> ordering_scores(std::span<const TrialRecord> records);

/// 1-based ranks; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman's rho (Pearson correlation of average ranks). Throws
/// std::invalid_argument on length mismatch, fewer than 2 values, or a
/// constant input.
double spearman(std::span<const double> a, std::span<const double> b);

struct Provenance {
  std::string model_id;
  std::string store_digest;
  std::string config_digest;
  std::optional<std::uint64_t> seed;

  bool operator==(const Provenance &) const = default;
};

/// Everything reported for one model's swap audit.
struct MetricsReport {
  std::string model;
  std::size_t option_count = 0;
  std::size_t parents = 0;
  double accuracy = 0.0;  // variant-averaged
  double circular_accuracy = 0.0;
  double pia = 0.0;
  std::optional<double> pia_excluding_all_correct;
  std::vector<double> per_position_accuracy;  // C_i / N
  std::vector<double> pia_weights;            // C_i / Pr_i
  std::vector<std::size_t> correct;           // C_i
  std::vector<std::size_t> picks;             // Pr_i
  PreferenceHistogram preference;
  std::size_t unparseable = 0;
  std::size_t failed = 0;
  double unparseable_rate = 0.0;
  Provenance provenance;

  [[nodiscard]] nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json &j);
};

MetricsReport score_swap_audit(std::span<const TrialRecord> records, std::string model_label,
                               Provenance provenance = {});

}  // namespace posbias
