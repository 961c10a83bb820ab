#include "posbias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "posbias/runner.hpp"

namespace posbias {
namespace {

std::string describe_missing(const std::vector<std::pair<std::string, std::size_t>> &missing) {
  std::string out = "incomplete variant groups, missing (parent, k):";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) {
    out += " (" + missing[i].first + ", " + std::to_string(missing[i].second) + ")";
  }
  if (missing.size() > shown) out += " ... " + std::to_string(missing.size() - shown) + " more";
  return out;
}

/// Complete swap-audit groups: parent -> records indexed k-1.
struct SwapGroups {
  std::size_t option_count = 0;
  std::map<std::string, std::vector<const TrialRecord *>> by_parent;
};

SwapGroups group_swap_records(std::span<const TrialRecord> records) {
  const auto kind = to_string(ExperimentKind::swap_audit);
  SwapGroups groups;
  for (const auto &r : records) {
    if (r.experiment != kind) continue;
    if (groups.option_count == 0) groups.option_count = r.option_count;
    if (r.option_count != groups.option_count) {
      throw DataError("swap-audit records mix option counts " + std::to_string(groups.option_count) + " and " +
                      std::to_string(r.option_count));
    }
    if (r.variant_index < 1 || r.variant_index > r.option_count || r.correct_index != r.variant_index) {
      throw DataError("swap-audit record '" + r.parent_id + "/" + r.variant_key +
                      "' does not have its correct answer at its variant position");
    }
    auto &slots = groups.by_parent[r.parent_id];
    slots.resize(groups.option_count, nullptr);
    slots[r.variant_index - 1] = &r;  // later records supersede earlier ones
  }
  std::vector<std::pair<std::string, std::size_t>> missing;
  for (const auto &[parent, slots] : groups.by_parent) {
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!slots[k]) missing.emplace_back(parent, k + 1);
    }
  }
  if (!missing.empty()) throw IncompleteGroupsError(std::move(missing));
  return groups;
}

PositionTally tally_groups(const SwapGroups &groups, bool exclude_all_correct) {
  PositionTally t;
  t.option_count = groups.option_count;
  t.correct.assign(t.option_count, 0);
  t.picks.assign(t.option_count, 0);
  for (const auto &[parent, slots] : groups.by_parent) {
    if (exclude_all_correct &&
        std::all_of(slots.begin(), slots.end(), [](const TrialRecord *r) { return r->correct; })) {
      continue;
    }
    ++t.parents;
    for (const auto *r : slots) {
      if (r->failed()) ++t.failed;
      if (!r->parsed()) {
        ++t.unparseable;
        continue;
      }
      ++t.picks[r->pick_index - 1];
      if (r->correct) ++t.correct[r->pick_index - 1];
    }
  }
  return t;
}

}  // namespace

IncompleteGroupsError::IncompleteGroupsError(std::vector<std::pair<std::string, std::size_t>> missing)
    : DataError(describe_missing(missing)), missing_(std::move(missing)) {}

PositionTally tally(std::span<const TrialRecord> records) { return tally_groups(group_swap_records(records), false); }

PositionTally tally(const TrialStore &store) {
  const auto records = store.latest();
  return tally(records);
}

double accuracy(const PositionTally &t) {
  if (t.parents == 0 || t.option_count == 0) throw DataError("accuracy is undefined for an empty tally (N = 0)");
  const auto total = std::accumulate(t.correct.begin(), t.correct.end(), std::size_t{0});
  return static_cast<double>(total) / static_cast<double>(t.option_count * t.parents);
}

double circular_accuracy(std::span<const TrialRecord> records) {
  const auto groups = group_swap_records(records);
  if (groups.by_parent.empty()) throw DataError("circular accuracy is undefined without any parent probe");
  std::size_t solved = 0;
  for (const auto &[parent, slots] : groups.by_parent) {
    if (std::all_of(slots.begin(), slots.end(), [](const TrialRecord *r) { return r->correct; })) ++solved;
  }
  return static_cast<double>(solved) / static_cast<double>(groups.by_parent.size());
}

PiaBreakdown pia(const PositionTally &t) {
  if (t.parents == 0 || t.option_count == 0) throw DataError("PIA is undefined for an empty tally (N = 0)");
  PiaBreakdown out;
  out.weight.assign(t.option_count, 0.0);
  out.term.assign(t.option_count, 0.0);
  const auto n = static_cast<double>(t.parents);
  double sum = 0.0;
  for (std::size_t i = 0; i < t.option_count; ++i) {
    if (t.picks[i] == 0) continue;
    const auto c = static_cast<double>(t.correct[i]);
    out.weight[i] = c / static_cast<double>(t.picks[i]);
    out.term[i] = out.weight[i] * (c / n);
    sum += out.term[i];
  }
  out.value = sum / static_cast<double>(t.option_count);
  return out;
}

std::optional<PiaBreakdown> pia_excluding_all_correct(std::span<const TrialRecord> records) {
  const auto t = tally_groups(group_swap_records(records), true);
  if (t.parents == 0) return std::nullopt;
  return pia(t);
}

PreferenceHistogram preference_histogram(std::span<const TrialRecord> records) {
  const auto groups = group_swap_records(records);
  PreferenceHistogram h;
  h.correct_by_position.assign(groups.option_count, 0);
  for (const auto &[parent, slots] : groups.by_parent) {
    if (std::all_of(slots.begin(), slots.end(), [](const TrialRecord *r) { return r->correct; })) {
      ++h.excluded_parents;
      continue;
    }
    ++h.remaining_parents;
    for (const auto *r : slots) {
      if (r->correct) ++h.correct_by_position[r->correct_index - 1];
    }
  }
  return h;
}

PlacementComparison placement_comparison(std::span<const TrialRecord> records) {
  PlacementComparison out;
  std::map<std::size_t, std::string> tags;
  std::map<std::string, std::map<std::size_t, const TrialRecord *>> by_parent;
  for (const auto &r : records) {
    if (r.experiment != to_string(ExperimentKind::keyframe_placement) &&
        r.experiment != to_string(ExperimentKind::rag_placement)) {
      continue;
    }
    if (out.experiment.empty()) out.experiment = r.experiment;
    if (r.experiment != out.experiment) throw DataError("store mixes keyframe and RAG placement records");
    if (auto [it, inserted] = tags.emplace(r.variant_index, r.variant_key); !inserted && it->second != r.variant_key) {
      throw DataError("placement index " + std::to_string(r.variant_index) + " carries tags '" + it->second +
                      "' and '" + r.variant_key + "'");
    }
    by_parent[r.parent_id][r.variant_index] = &r;
  }
  if (by_parent.empty()) throw DataError("no placement records to compare");

  std::vector<std::pair<std::string, std::size_t>> missing;
  for (const auto &[parent, placed] : by_parent) {
    for (const auto &[index, tag] : tags) {
      if (!placed.count(index)) missing.emplace_back(parent, index);
    }
  }
  if (!missing.empty()) throw IncompleteGroupsError(std::move(missing));

  for (const auto &[index, tag] : tags) {
    PlacementScore s{tag, index, 0, 0, 0.0};
    for (const auto &[parent, placed] : by_parent) {
      ++s.total;
      if (placed.at(index)->correct) ++s.correct;
    }
    s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.total);
    out.scores.push_back(std::move(s));
  }
  const auto &reference = out.scores.back();
  for (std::size_t i = 0; i + 1 < out.scores.size(); ++i) {
    out.deltas.push_back({reference.tag, out.scores[i].tag, reference.accuracy - out.scores[i].accuracy});
  }
  return out;
}

std::vector<double> ordering_scores(std::span<const TrialRecord> records) {
  std::map<std::size_t, std::pair<double, double>> by_rank;  // rank -> (correct, total)
  for (const auto &r : records) {
    if (r.experiment != to_string(ExperimentKind::ordering_sweep)) continue;
    auto &[correct, total] = by_rank[r.variant_index];
    total += 1.0;
    if (r.correct) correct += 1.0;
  }
  std::vector<double> out;
  std::size_t expected = 0;
  for (const auto &[rank, counts] : by_rank) {
    if (rank != expected++) throw DataError("ordering sweep is missing rank " + std::to_string(expected - 1));
    out.push_back(counts.first / counts.second);
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("spearman: length mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw std::invalid_argument("spearman: need at least 2 paired values");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw std::invalid_argument("spearman: non-finite value");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  // Both rank vectors have mean (n + 1) / 2.
  const double mean = (static_cast<double>(a.size()) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double dx = ra[i] - mean;
    const double dy = rb[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman: undefined for a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json prov{{"model_id", provenance.model_id},
                      {"store_digest", provenance.store_digest},
                      {"config_digest", provenance.config_digest},
                      {"seed", provenance.seed ? nlohmann::json(*provenance.seed) : nlohmann::json(nullptr)}};
  return {{"kind", "swap_audit_metrics"},
          {"model", model},
          {"option_count", option_count},
          {"parents", parents},
          {"accuracy", accuracy},
          {"accuracy_basis", "variant-averaged"},
          {"circular_accuracy", circular_accuracy},
          {"pia", pia},
          {"pia_excluding_all_correct",
           pia_excluding_all_correct ? nlohmann::json(*pia_excluding_all_correct) : nlohmann::json(nullptr)},
          {"per_position_accuracy", per_position_accuracy},
          {"pia_weights", pia_weights},
          {"correct", correct},
          {"picks", picks},
          {"preference_histogram",
           {{"correct_by_position", preference.correct_by_position},
            {"excluded_parents", preference.excluded_parents},
            {"remaining_parents", preference.remaining_parents}}},
          {"unparseable", unparseable},
          {"failed", failed},
          {"unparseable_rate", unparseable_rate},
          {"provenance", std::move(prov)}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json &j) {
  MetricsReport r;
  r.model = j.at("model").get<std::string>();
  r.option_count = j.at("option_count").get<std::size_t>();
  r.parents = j.at("parents").get<std::size_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.circular_accuracy = j.at("circular_accuracy").get<double>();
  r.pia = j.at("pia").get<double>();
  if (!j.at("pia_excluding_all_correct").is_null()) {
    r.pia_excluding_all_correct = j.at("pia_excluding_all_correct").get<double>();
  }
  r.per_position_accuracy = j.at("per_position_accuracy").get<std::vector<double>>();
  r.pia_weights = j.at("pia_weights").get<std::vector<double>>();
  r.correct = j.at("correct").get<std::vector<std::size_t>>();
  r.picks = j.at("picks").get<std::vector<std::size_t>>();
  const auto &h = j.at("preference_histogram");
  r.preference.correct_by_position = h.at("correct_by_position").get<std::vector<std::size_t>>();
  r.preference.excluded_parents = h.at("excluded_parents").get<std::size_t>();
  r.preference.remaining_parents = h.at("remaining_parents").get<std::size_t>();
  r.unparseable = j.at("unparseable").get<std::size_t>();
  r.failed = j.at("failed").get<std::size_t>();
  r.unparseable_rate = j.at("unparseable_rate").get<double>();
  const auto &p = j.at("provenance");
  r.provenance.model_id = p.value("model_id", "");
  r.provenance.store_digest = p.value("store_digest", "");
  r.provenance.config_digest = p.value("config_digest", "");
  if (p.contains("seed") && !p.at("seed").is_null()) r.provenance.seed = p.at("seed").get<std::uint64_t>();
  return r;
}

MetricsReport score_swap_audit(std::span<const TrialRecord> records, std::string model_label, Provenance provenance) {
  const auto t = tally(records);
  const auto breakdown = pia(t);
  MetricsReport r;
  r.model = std::move(model_label);
  r.option_count = t.option_count;
  r.parents = t.parents;
  r.accuracy = accuracy(t);
  r.circular_accuracy = circular_accuracy(records);
  r.pia = breakdown.value;
  if (auto filtered = pia_excluding_all_correct(records)) r.pia_excluding_all_correct = filtered->value;
  for (std::size_t i = 0; i < t.option_count; ++i) {
    r.per_position_accuracy.push_back(static_cast<double>(t.correct[i]) / static_cast<double>(t.parents));
  }
  r.pia_weights = breakdown.weight;
  r.correct = t.correct;
  r.picks = t.picks;
  r.preference = preference_histogram(records);
  r.unparseable = t.unparseable;
  r.failed = t.failed;
  r.unparseable_rate = static_cast<double>(t.unparseable) / static_cast<double>(t.option_count * t.parents);
  r.provenance = std::move(provenance);
  return r;
}

}  // namespace posbias
