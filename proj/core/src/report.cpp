#include "posbias/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "posbias/error.hpp"
#include "posbias/probe.hpp"

namespace posbias {

std::vector<MetricsRow> render_metrics_table(std::span<const MetricsReport> reports) {
  std::vector<MetricsRow> rows;
  rows.reserve(reports.size());
  for (const auto &r : reports) rows.push_back({r.model, r.accuracy, r.circular_accuracy, r.pia});
  return rows;
}

SpearmanMatrix render_spearman_matrix(std::span<const NamedScores> vectors) {
  if (vectors.size() < 2) throw std::invalid_argument("a Spearman matrix needs at least two score vectors");
  for (const auto &v : vectors) {
    if (v.scores.size() != vectors.front().scores.size()) {
      throw std::invalid_argument("score vectors must have equal length ('" + v.model + "' differs)");
    }
  }
  SpearmanMatrix m;
  const auto n = vectors.size();
  m.rho.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    m.models.push_back(vectors[i].model);
    m.rho[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      try {
        const double rho = spearman(vectors[i].scores, vectors[j].scores);
        m.rho[i][j] = rho;
        m.rho[j][i] = rho;
      } catch (const std::invalid_argument &) {
      }
    }
  }
  return m;
}

void add_metrics(ReportDoc &doc, const MetricsReport &report) {
  doc.metrics.push_back({report.model, report.accuracy, report.circular_accuracy, report.pia});
  for (std::size_t i = 0; i < report.preference.correct_by_position.size(); ++i) {
    doc.histogram.push_back({report.model, display_label(position_label(i + 1)),
                             static_cast<double>(report.preference.correct_by_position[i])});
  }
  doc.provenance.push_back({report.model, report.provenance});
}

void add_placement(ReportDoc &doc, const std::string &model, const PlacementComparison &comparison,
                   const Provenance &provenance) {
  const auto &reference = comparison.scores.back();
  for (const auto &s : comparison.scores) {
    PlacementRow row{model, comparison.experiment, s.tag, static_cast<double>(s.correct),
                     static_cast<double>(s.total), s.accuracy, std::nullopt};
    if (&s != &reference) row.gain_of_reference = reference.accuracy - s.accuracy;
    doc.placements.push_back(std::move(row));
  }
  doc.provenance.push_back({model, provenance});
}

std::string_view to_string(ExportFormat format) {
  switch (format) {
    case ExportFormat::table_text:
      return "table-text";
    case ExportFormat::flat_tabular:
      return "flat-tabular";
    case ExportFormat::structured:
      return "structured";
  }
  return "structured";
}

ExportFormat export_format_from_string(std::string_view name) {
  if (name == "table-text" || name == "text") return ExportFormat::table_text;
  if (name == "flat-tabular" || name == "csv") return ExportFormat::flat_tabular;
  if (name == "structured" || name == "json") return ExportFormat::structured;
  throw std::invalid_argument("unknown export format '" + std::string(name) + "'");
}

std::string format_percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", rate * 100.0);
  return buf;
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pad(const std::string &s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

std::string text_table(const std::vector<std::string> &header, const std::vector<std::vector<std::string>> &rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto &row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  const auto line = [&](const std::vector<std::string> &cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += " | ";
      out += pad(cells[c], width[c], c > 0);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  line(header);
  std::string rule;
  for (std::size_t c = 0; c < width.size(); ++c) {
    if (c) rule += "-+-";
    rule += std::string(width[c], '-');
  }
  out += rule + '\n';
  for (const auto &row : rows) line(row);
  return out;
}

std::string table_text(const ReportDoc &doc) {
  std::vector<std::string> sections;
  std::vector<std::vector<std::string>> rows;

  if (!doc.metrics.empty()) {
    rows.clear();
    for (const auto &r : doc.metrics) {
      rows.push_back(
          {r.model, format_percent(r.accuracy), format_percent(r.circular_accuracy), format_percent(r.pia)});
    }
    sections.push_back("== Model comparison ==\n" +
                       text_table({"Model", "Accuracy (%)", "Circular Evaluation Accuracy (%)",
                                   "Position-Invariant Accuracy (PIA) (%)"},
                                  rows));
  }

  if (!doc.histogram.empty()) {
    rows.clear();
    for (const auto &h : doc.histogram) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.0f", h.count);
      rows.push_back({h.model, h.position, buf});
    }
    sections.push_back("== Correct responses by position (all-correct probes excluded) ==\n" +
                       text_table({"Model", "Position", "Correct"}, rows));
  }

  if (!doc.placements.empty()) {
    rows.clear();
    for (const auto &p : doc.placements) {
      char correct[40], total[40];
      std::snprintf(correct, sizeof correct, "%.0f", p.correct);
      std::snprintf(total, sizeof total, "%.0f", p.total);
      rows.push_back({p.model, p.experiment, p.tag, correct, total, format_percent(p.accuracy),
                      p.gain_of_reference ? format_percent(*p.gain_of_reference) : "-"});
    }
    sections.push_back("== Placement comparison ==\n" +
                       text_table({"Model", "Experiment", "Placement", "Correct", "Total", "Accuracy (%)",
                                   "Last vs this (%)"},
                                  rows));
  }

  if (doc.spearman) {
    std::vector<std::string> header{""};
    header.insert(header.end(), doc.spearman->models.begin(), doc.spearman->models.end());
    rows.clear();
    for (std::size_t i = 0; i < doc.spearman->models.size(); ++i) {
      std::vector<std::string> row{doc.spearman->models[i]};
      for (const auto &cell : doc.spearman->rho[i]) row.push_back(cell ? fixed2(*cell) : "n/a");
      rows.push_back(std::move(row));
    }
    sections.push_back("== Spearman correlation of ordering scores ==\n" + text_table(header, rows));
  }

  if (!doc.provenance.empty()) {
    rows.clear();
    for (const auto &p : doc.provenance) {
      rows.push_back({p.model, p.provenance.model_id, p.provenance.store_digest, p.provenance.config_digest,
                      p.provenance.seed ? std::to_string(*p.provenance.seed) : "-"});
    }
    sections.push_back("== Provenance ==\n" +
                       text_table({"Model", "Model id", "Store digest", "Config digest", "Seed"}, rows));
  }

  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) out += '\n';
    out += sections[i];
  }
  return out;
}

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string flat_tabular(const ReportDoc &doc) {
  std::string out = "section,model,key,value\n";
  const auto row = [&](std::string_view section, const std::string &model, const std::string &key,
                       const std::string &value) {
    out += std::string(section) + "," + csv_field(model) + "," + csv_field(key) + "," + csv_field(value) + "\n";
  };
  for (const auto &m : doc.metrics) {
    row("metrics", m.model, "accuracy", exact(m.accuracy));
    row("metrics", m.model, "circular_accuracy", exact(m.circular_accuracy));
    row("metrics", m.model, "pia", exact(m.pia));
  }
  for (const auto &h : doc.histogram) row("histogram", h.model, h.position, exact(h.count));
  for (const auto &p : doc.placements) {
    const auto prefix = p.experiment + "/" + p.tag + "/";
    row("placement", p.model, prefix + "correct", exact(p.correct));
    row("placement", p.model, prefix + "total", exact(p.total));
    row("placement", p.model, prefix + "accuracy", exact(p.accuracy));
    if (p.gain_of_reference) row("placement", p.model, prefix + "gain_of_reference", exact(*p.gain_of_reference));
  }
  if (doc.spearman) {
    const auto &s = *doc.spearman;
    for (std::size_t i = 0; i < s.models.size(); ++i) {
      for (std::size_t j = 0; j < s.models.size(); ++j) {
        row("spearman", s.models[i], s.models[j], s.rho[i][j] ? exact(*s.rho[i][j]) : "n/a");
      }
    }
  }
  for (const auto &p : doc.provenance) {
    row("provenance", p.model, "model_id", p.provenance.model_id);
    row("provenance", p.model, "store_digest", p.provenance.store_digest);
    row("provenance", p.model, "config_digest", p.provenance.config_digest);
    row("provenance", p.model, "seed", p.provenance.seed ? std::to_string(*p.provenance.seed) : "");
  }
  return out;
}

nlohmann::json provenance_json(const Provenance &p) {
  return {{"model_id", p.model_id},
          {"store_digest", p.store_digest},
          {"config_digest", p.config_digest},
          {"seed", p.seed ? nlohmann::json(*p.seed) : nlohmann::json(nullptr)}};
}

std::string structured(const ReportDoc &doc) {
  auto metrics = nlohmann::json::array();
  for (const auto &m : doc.metrics) {
    metrics.push_back({{"model", m.model},
                       {"accuracy", m.accuracy},
                       {"circular_accuracy", m.circular_accuracy},
                       {"pia", m.pia}});
  }
  auto histogram = nlohmann::json::array();
  for (const auto &h : doc.histogram) histogram.push_back({{"model", h.model}, {"position", h.position}, {"count", h.count}});
  auto placements = nlohmann::json::array();
  for (const auto &p : doc.placements) {
    placements.push_back({{"model", p.model},
                          {"experiment", p.experiment},
                          {"tag", p.tag},
                          {"correct", p.correct},
                          {"total", p.total},
                          {"accuracy", p.accuracy},
                          {"gain_of_reference",
                           p.gain_of_reference ? nlohmann::json(*p.gain_of_reference) : nlohmann::json(nullptr)}});
  }
  nlohmann::json spearman = nullptr;
  if (doc.spearman) {
    auto matrix = nlohmann::json::array();
    for (const auto &row : doc.spearman->rho) {
      auto cells = nlohmann::json::array();
      for (const auto &c : row) cells.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
      matrix.push_back(std::move(cells));
    }
    spearman = {{"models", doc.spearman->models}, {"rho", std::move(matrix)}};
  }
  auto provenance = nlohmann::json::array();
  for (const auto &p : doc.provenance) {
    auto pj = provenance_json(p.provenance);
    pj["model"] = p.model;
    provenance.push_back(std::move(pj));
  }
  const nlohmann::json j{{"schema_version", 1},
                         {"generated_at", doc.generated_at},
                         {"sections",
                          {{"metrics", std::move(metrics)},
                           {"histogram", std::move(histogram)},
                           {"placements", std::move(placements)},
                           {"spearman", std::move(spearman)}}},
                         {"provenance", std::move(provenance)}};
  return j.dump(2) + "\n";
}

}  // namespace

std::string export_report(const ReportDoc &doc, ExportFormat format) {
  switch (format) {
    case ExportFormat::table_text:
      return table_text(doc);
    case ExportFormat::flat_tabular:
      return flat_tabular(doc);
    case ExportFormat::structured:
      return structured(doc);
  }
  throw std::invalid_argument("unknown export format");
}

ReportDoc parse_flat_report(std::string_view csv) {
  ReportDoc doc;
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "section,model,key,value") {
    throw DataError("flat report lacks the section,model,key,value header");
  }
  std::map<std::string, std::size_t> metric_row;
  std::map<std::pair<std::string, std::string>, std::size_t> placement_row;
  std::map<std::string, std::size_t> provenance_row;
  std::vector<std::string> spearman_models;
  std::map<std::pair<std::string, std::string>, std::optional<double>> spearman_cells;

  const auto number = [](const std::string &s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw DataError("flat report value '" + s + "' is not a number");
    return v;
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 4) throw DataError("flat report row needs 4 fields: " + line);
    const auto &[section, model, key, value] = std::tie(f[0], f[1], f[2], f[3]);
    if (section == "metrics") {
      auto [it, inserted] = metric_row.try_emplace(model, doc.metrics.size());
      if (inserted) doc.metrics.push_back({model, 0, 0, 0});
      auto &row = doc.metrics[it->second];
      if (key == "accuracy") row.accuracy = number(value);
      else if (key == "circular_accuracy") row.circular_accuracy = number(value);
      else if (key == "pia") row.pia = number(value);
      else throw DataError("unknown metrics key '" + key + "'");
    } else if (section == "histogram") {
      doc.histogram.push_back({model, key, number(value)});
    } else if (section == "placement") {
      const auto a = key.find('/');
      const auto b = key.rfind('/');
      if (a == std::string::npos || a == b) throw DataError("placement key '" + key + "' is malformed");
      const auto experiment = key.substr(0, a);
      const auto tag = key.substr(a + 1, b - a - 1);
      const auto field = key.substr(b + 1);
      auto [it, inserted] = placement_row.try_emplace({model, experiment + "/" + tag}, doc.placements.size());
      if (inserted) doc.placements.push_back({model, experiment, tag, 0, 0, 0, std::nullopt});
      auto &row = doc.placements[it->second];
      if (field == "correct") row.correct = number(value);
      else if (field == "total") row.total = number(value);
      else if (field == "accuracy") row.accuracy = number(value);
      else if (field == "gain_of_reference") row.gain_of_reference = number(value);
      else throw DataError("unknown placement field '" + field + "'");
    } else if (section == "spearman") {
      if (std::find(spearman_models.begin(), spearman_models.end(), model) == spearman_models.end()) {
        spearman_models.push_back(model);
      }
      spearman_cells[{model, key}] = value == "n/a" ? std::nullopt : std::optional<double>(number(value));
    } else if (section == "provenance") {
      auto [it, inserted] = provenance_row.try_emplace(model, doc.provenance.size());
      if (inserted) doc.provenance.push_back({model, {}});
      auto &p = doc.provenance[it->second].provenance;
      if (key == "model_id") p.model_id = value;
      else if (key == "store_digest") p.store_digest = value;
      else if (key == "config_digest") p.config_digest = value;
      else if (key == "seed") p.seed = value.empty() ? std::nullopt : std::optional<std::uint64_t>(std::stoull(value));
      else throw DataError("unknown provenance key '" + key + "'");
    } else {
      throw DataError("unknown flat report section '" + section + "'");
    }
  }
  if (!spearman_models.empty()) {
    SpearmanMatrix m;
    m.models = spearman_models;
    m.rho.assign(m.models.size(), std::vector<std::optional<double>>(m.models.size()));
    for (std::size_t i = 0; i < m.models.size(); ++i) {
      for (std::size_t j = 0; j < m.models.size(); ++j) {
        auto it = spearman_cells.find({m.models[i], m.models[j]});
        if (it == spearman_cells.end()) throw DataError("flat report Spearman matrix is incomplete");
        m.rho[i][j] = it->second;
      }
    }
    doc.spearman = std::move(m);
  }
  return doc;
}

ReportDoc parse_structured_report(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  ReportDoc doc;
  doc.generated_at = j.value("generated_at", "");
  const auto &s = j.at("sections");
  for (const auto &m : s.at("metrics")) {
    doc.metrics.push_back({m.at("model").get<std::string>(), m.at("accuracy").get<double>(),
                           m.at("circular_accuracy").get<double>(), m.at("pia").get<double>()});
  }
  for (const auto &h : s.at("histogram")) {
    doc.histogram.push_back({h.at("model").get<std::string>(), h.at("position").get<std::string>(),
                             h.at("count").get<double>()});
  }
  for (const auto &p : s.at("placements")) {
    PlacementRow row{p.at("model").get<std::string>(), p.at("experiment").get<std::string>(),
                     p.at("tag").get<std::string>(), p.at("correct").get<double>(), p.at("total").get<double>(),
                     p.at("accuracy").get<double>(), std::nullopt};
    if (!p.at("gain_of_reference").is_null()) row.gain_of_reference = p.at("gain_of_reference").get<double>();
    doc.placements.push_back(std::move(row));
  }
  if (!s.at("spearman").is_null()) {
    SpearmanMatrix m;
    m.models = s.at("spearman").at("models").get<std::vector<std::string>>();
    for (const auto &row : s.at("spearman").at("rho")) {
      std::vector<std::optional<double>> cells;
      for (const auto &c : row) cells.push_back(c.is_null() ? std::nullopt : std::optional<double>(c.get<double>()));
      m.rho.push_back(std::move(cells));
    }
    doc.spearman = std::move(m);
  }
  for (const auto &p : j.at("provenance")) {
    Provenance prov{p.value("model_id", ""), p.value("store_digest", ""), p.value("config_digest", ""), std::nullopt};
    if (p.contains("seed") && !p.at("seed").is_null()) prov.seed = p.at("seed").get<std::uint64_t>();
    doc.provenance.push_back({p.at("model").get<std::string>(), prov});
  }
  return doc;
}

}  // namespace posbias
