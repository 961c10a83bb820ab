#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posbias/metrics.hpp"

namespace posbias {

/// One row of the model comparison table, rates in [0, 1].
struct MetricsRow {
  std::string model;
  double accuracy = 0.0;
  double circular_accuracy = 0.0;
  double pia = 0.0;
  bool operator==(const MetricsRow &) const = default;
};

struct HistogramRow {
  std::string model;
  std::string position;  // "Op.A", ...
  double count = 0.0;
  bool operator==(const HistogramRow &) const = default;
};

struct PlacementRow {
  std::string model;
  std::string experiment;
  std::string tag;
  double correct = 0.0;
  double total = 0.0;
  double accuracy = 0.0;
  std::optional<double> gain_of_reference;  // accuracy(last placement) - accuracy(tag)
  bool operator==(const PlacementRow &) const = default;
};

struct NamedScores {
  std::string model;
  std::vector<double> scores;
};

/// Symmetric Spearman matrix; entries are nullopt where rho is undefined.
struct SpearmanMatrix {
  std::vector<std::string> models;
  std::vector<std::vector<std::optional<double>>> rho;
  bool operator==(const SpearmanMatrix &) const = default;
};

struct ProvenanceRow {
  std::string model;
  Provenance provenance;
  bool operator==(const ProvenanceRow &) const = default;
};

struct ReportDoc {
  std::vector<MetricsRow> metrics;
  std::vector<HistogramRow> histogram;
  std::vector<PlacementRow> placements;
  std::optional<SpearmanMatrix> spearman;
  std::vector<ProvenanceRow> provenance;
  std::string generated_at;  // excluded from determinism comparisons

  bool operator==(const ReportDoc &) const = default;
};

/// Table rows for a set of swap-audit reports, in input order.
std::vector<MetricsRow> render_metrics_table(std::span<const MetricsReport> reports);

/// Pairwise Spearman matrix of per-ordering score vectors. Needs at least two
/// vectors of equal length; undefined cells (constant vectors) are nullopt.
SpearmanMatrix render_spearman_matrix(std::span<const NamedScores> vectors);

/// Adds the metrics row, post-exclusion histogram and provenance of a report.
void add_metrics(ReportDoc &doc, const MetricsReport &report);
void add_placement(ReportDoc &doc, const std::string &model, const PlacementComparison &comparison,
                   const Provenance &provenance);

enum class ExportFormat { table_text, flat_tabular, structured };

std::string_view to_string(ExportFormat format);
/// Accepts "table-text"/"text", "flat-tabular"/"csv", "structured"/"json".
ExportFormat export_format_from_string(std::string_view name);

/// Deterministic serialization. table-text prints percentages with two
/// decimals; flat-tabular (section,model,key,value CSV) keeps full precision.
std::string export_report(const ReportDoc &doc, ExportFormat format);

/// Inverse of the flat-tabular export.
ReportDoc parse_flat_report(std::string_view csv);
/// Inverse of the structured export.
ReportDoc parse_structured_report(std::string_view json_text);

/// "83.86" for 0.8386.
std::string format_percent(double rate);

}  // namespace posbias
