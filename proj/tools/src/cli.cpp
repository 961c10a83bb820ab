#include "posbias/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <set>

#include "posbias/atomic_file.hpp"
#include "posbias/config.hpp"
#include "posbias/hash.hpp"
#include "posbias/ingest.hpp"
#include "posbias/metrics.hpp"
#include "posbias/report.hpp"
#include "posbias/runner.hpp"
#include "posbias/serialize.hpp"
#include "posbias/store.hpp"
#include "posbias/variants.hpp"

namespace posbias::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string digest_of(const json &j) { return sha256_hex(j.dump()).substr(0, 16); }

json artifact_provenance(std::string_view command, const json &options, std::optional<std::uint64_t> seed) {
  return {{"command", command},
          {"config_digest", digest_of(options)},
          {"seed", seed ? json(*seed) : json(nullptr)},
          {"options", options}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t require_seed(const std::optional<std::uint64_t> &seed, std::string_view what) {
  if (!seed) throw ConfigError("--seed is required for " + std::string(what) + " (sampling must be reproducible)");
  return *seed;
}

MatchingMode matching_mode(const std::string &name) {
  if (name == "image_only") return MatchingMode::image_only;
  if (name == "pair") return MatchingMode::pair;
  throw ConfigError("--mode must be image_only or pair");
}

// ingest ---------------------------------------------------------------------

struct IngestArgs {
  std::string kind;
  fs::path input;
  fs::path pool;
  fs::path out;
  std::size_t options = 4;
  std::string mode = "image_only";
  std::size_t distractors = 3;
  std::optional<std::uint64_t> seed;
  double target_seconds = 10.0;
  double fps = 3.0;
};

std::vector<ProbeItem> build_probes(const IngestArgs &a, std::ostream &err, int verbosity) {
  if (a.kind == "mcq") {
    auto result = ingest_mcq(a.input, a.options);
    for (const auto &s : result.skipped) {
      if (verbosity > 0) err << "skipped line " << s.line << " (" << s.id << "): " << s.reason << "\n";
    }
    if (!result.skipped.empty()) err << "skipped " << result.skipped.size() << " rows\n";
    return std::move(result.items);
  }
  if (a.kind == "captions") {
    const auto entries = read_caption_manifest(a.input);
    MatchingOptions o;
    o.mode = matching_mode(a.mode);
    o.distractor_count = a.distractors;
    o.seed = require_seed(a.seed, "caption matching probes");
    return build_matching_probes(entries, o);
  }
  if (a.kind == "clips") {
    const auto clips = read_clip_manifest(a.input);
    const auto keys = select_key_clips(clips);
    VideoProbeOptions o;
    o.target_duration = a.target_seconds;
    o.fps = a.fps;
    o.seed = require_seed(a.seed, "video probes");
    std::vector<ProbeItem> items;
    for (const auto &key : keys) {
      items.push_back(make_video_item(key.id, build_video_probe(key, clips, o)));
    }
    if (items.empty()) throw DataError("no clip in '" + a.input.string() + "' lasts between 2 and 3 seconds");
    return items;
  }
  if (a.kind == "rag") {
    const auto seed = require_seed(a.seed, "RAG probes");
    auto mcq = ingest_mcq(a.input, a.options).items;
    std::vector<ModalityAtom> pool;
    if (!a.pool.empty()) {
      for (auto &e : read_caption_manifest(a.pool)) pool.push_back(std::move(e.image));
    } else {
      pool = anchor_images(mcq);
    }
    std::vector<ProbeItem> items;
    for (const auto &item : mcq) {
      if (!item.anchor || item.anchor->kind != AtomKind::image_ref) continue;
      items.push_back(build_rag_probe(item, pool, a.distractors, seed));
    }
    return items;
  }
  throw ConfigError("--kind must be one of mcq, captions, clips, rag");
}

json ingest_options(const IngestArgs &a) {
  return {{"kind", a.kind},       {"input", a.input.filename().string()},
          {"pool", a.pool.filename().string()},
          {"options", a.options}, {"mode", a.mode},
          {"distractors", a.distractors},
          {"target_seconds", a.target_seconds},
          {"fps", a.fps}};
}

int do_ingest(const IngestArgs &a, std::ostream &out, std::ostream &err, int verbosity) {
  const auto items = build_probes(a, err, verbosity);
  write_probe_file(a.out, items, artifact_provenance("ingest", ingest_options(a), a.seed));
  out << "wrote " << items.size() << " probes to " << a.out.string() << "\n";
  return kOk;
}

// gen ------------------------------------------------------------------------

struct GenArgs {
  fs::path probes;
  fs::path captions;
  std::string mode = "image_only";
  std::size_t distractors = 3;
  std::optional<std::uint64_t> seed;
  std::string rule = "swap";
  fs::path out;
};

VariantSet placement_set(const ProbeItem &item) {
  VariantSet set{item.id, {}, {}};
  if (item.mode == ProbeMode::video_placement) {
    for (auto p : kAllKeyframePlacements) {
      set.variants.push_back(place_keyframes(item, p));
      set.placement_of_correct.push_back(static_cast<std::size_t>(p) + 1);
    }
  } else {
    for (std::size_t k = 1; k <= item.rag->images.size(); ++k) {
      set.variants.push_back(place_rag_image(item, k));
      set.placement_of_correct.push_back(k);
    }
  }
  return set;
}

int do_gen(const GenArgs &a, std::ostream &out) {
  std::vector<ProbeItem> probes;
  json options{{"rule", a.rule}};
  if (!a.captions.empty()) {
    MatchingOptions o;
    o.mode = matching_mode(a.mode);
    o.distractor_count = a.distractors;
    o.seed = require_seed(a.seed, "caption matching probes");
    probes = build_matching_probes(read_caption_manifest(a.captions), o);
    options.update({{"captions", a.captions.filename().string()}, {"mode", a.mode}, {"distractors", a.distractors}});
  } else if (!a.probes.empty()) {
    probes = read_probe_file(a.probes);
    options["probes"] = a.probes.filename().string();
  } else {
    throw ConfigError("gen needs --probes or --captions");
  }
  VariantRule rule;
  try {
    rule = variant_rule_from_string(a.rule);
  } catch (const std::invalid_argument &) {
    throw ConfigError("--rule must be swap or rotate");
  }
  std::vector<VariantSet> sets;
  sets.reserve(probes.size());
  for (const auto &p : probes) {
    const bool placement = p.mode == ProbeMode::video_placement || p.mode == ProbeMode::rag_placement;
    sets.push_back(placement ? placement_set(p) : swap_variants(p, rule));
  }
  write_variant_file(a.out, sets, artifact_provenance("gen", options, a.seed));
  out << "wrote " << sets.size() << " variant sets to " << a.out.string() << "\n";
  return kOk;
}

// run ------------------------------------------------------------------------

struct RunArgs {
  fs::path config;
  std::optional<std::uint64_t> seed;
  bool retry_failed = false;
};

int do_run(const RunArgs &a, std::ostream &out, std::ostream &err, int verbosity) {
  auto config = load_config(a.config);
  if (a.seed) config.seed = a.seed;
  if (a.retry_failed) config.retry_failed = true;

  const auto probes = read_probe_file(config.probes);
  auto model = make_model(config);
  const json provenance{{"command", "run"},
                        {"config_digest", config.digest()},
                        {"seed", config.seed ? json(*config.seed) : json(nullptr)},
                        {"model_id", model->id()},
                        {"experiment", to_string(config.experiment)},
                        {"config", config.to_json()}};
  if (config.output.has_parent_path()) fs::create_directories(config.output.parent_path());
  auto store = TrialStore::open(config.output, provenance);
  auto cache = ResponseCache::open(config.cache_dir);
  auto options = config.run_options();
  options.cache = cache.get();

  RunStats stats;
  switch (config.experiment) {
    case ExperimentKind::swap_audit:
      stats = run_swap_audit(probes, *model, *store, options);
      break;
    case ExperimentKind::ordering_sweep: {
      const auto demos = read_demonstrations(config.demonstrations);
      const auto scores = run_ordering_sweep(demos, probes, *model, *store, options, &stats);
      if (verbosity > 0) err << "ordering scores: " << json(scores).dump() << "\n";
      break;
    }
    case ExperimentKind::keyframe_placement:
    case ExperimentKind::rag_placement:
      stats = run_placement(probes, *model, *store, options);
      break;
  }
  out << "trials " << stats.trials << ", model calls " << stats.model_calls << ", cache hits " << stats.cache_hits
      << ", resumed " << stats.resumed << ", failures " << stats.failures << "\n";
  out << "store " << config.output.string() << " (" << store->size() << " records)\n";
  if (stats.failures > 0) {
    err << stats.failures << " trials failed at the endpoint; rerun with --retry-failed to retry them\n";
    return kEndpointFailure;
  }
  return kOk;
}

// score ----------------------------------------------------------------------

json placement_json(const PlacementComparison &c) {
  json scores = json::array();
  for (const auto &s : c.scores) {
    scores.push_back(
        {{"tag", s.tag}, {"index", s.index}, {"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy}});
  }
  json deltas = json::array();
  for (const auto &d : c.deltas) deltas.push_back({{"reference", d.reference}, {"other", d.other}, {"delta", d.delta}});
  return {{"experiment", c.experiment}, {"scores", std::move(scores)}, {"deltas", std::move(deltas)}};
}

PlacementComparison placement_from_json(const json &j) {
  PlacementComparison c;
  c.experiment = j.at("experiment").get<std::string>();
  for (const auto &s : j.at("scores")) {
    c.scores.push_back({s.at("tag").get<std::string>(), s.at("index").get<std::size_t>(),
                        s.at("correct").get<std::size_t>(), s.at("total").get<std::size_t>(),
                        s.at("accuracy").get<double>()});
  }
  for (const auto &d : j.at("deltas")) {
    c.deltas.push_back({d.at("reference").get<std::string>(), d.at("other").get<std::string>(),
                        d.at("delta").get<double>()});
  }
  return c;
}

json provenance_json(const Provenance &p) {
  return {{"model_id", p.model_id},
          {"store_digest", p.store_digest},
          {"config_digest", p.config_digest},
          {"seed", p.seed ? json(*p.seed) : json(nullptr)}};
}

Provenance provenance_from_json(const json &j) {
  Provenance p{j.value("model_id", ""), j.value("store_digest", ""), j.value("config_digest", ""), std::nullopt};
  if (j.contains("seed") && !j.at("seed").is_null()) p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

struct ScoreArgs {
  fs::path store;
  fs::path out;
  std::string label;
  bool print = false;
};

int do_score(const ScoreArgs &a, std::ostream &out) {
  if (!fs::exists(a.store)) throw DataError("store '" + a.store.string() + "' does not exist");
  const auto store = TrialStore::open(a.store);
  const auto records = store->latest();
  if (records.empty()) throw DataError("store '" + a.store.string() + "' holds no trials");

  std::set<std::string> experiments, models;
  for (const auto &r : records) {
    experiments.insert(r.experiment);
    models.insert(r.model_id);
  }
  if (experiments.size() != 1) throw DataError("store mixes experiments; score them from separate stores");

  const auto header = store->provenance();
  Provenance provenance;
  provenance.model_id = *models.begin();
  provenance.store_digest = store->canonical_digest();
  provenance.config_digest = header.value("config_digest", "");
  if (header.contains("seed") && !header.at("seed").is_null()) provenance.seed = header.at("seed").get<std::uint64_t>();

  const auto label = a.label.empty() ? provenance.model_id : a.label;
  const auto kind = experiment_kind_from_string(*experiments.begin());
  json artifact{{"record", "score"},
                {"schema_version", kSchemaVersion},
                {"experiment", to_string(kind)},
                {"model", label},
                {"provenance", provenance_json(provenance)}};
  ReportDoc doc;
  switch (kind) {
    case ExperimentKind::swap_audit: {
      const auto report = score_swap_audit(records, label, provenance);
      artifact["metrics"] = report.to_json();
      add_metrics(doc, report);
      break;
    }
    case ExperimentKind::ordering_sweep:
      artifact["ordering_scores"] = ordering_scores(records);
      break;
    case ExperimentKind::keyframe_placement:
    case ExperimentKind::rag_placement: {
      const auto comparison = placement_comparison(records);
      artifact["placement"] = placement_json(comparison);
      add_placement(doc, label, comparison, provenance);
      break;
    }
  }
  write_file_atomic(a.out, artifact.dump(2) + "\n");
  if (a.print) out << export_report(doc, ExportFormat::table_text);
  out << "wrote score for " << label << " to " << a.out.string() << "\n";
  return kOk;
}

// compare / report -----------------------------------------------------------

struct ReportArgs {
  std::vector<fs::path> inputs;
  fs::path out;
  std::string format = "table-text";
  std::string timestamp;
};

ReportDoc doc_from_scores(const std::vector<fs::path> &inputs, bool metrics_sections) {
  ReportDoc doc;
  std::vector<NamedScores> orderings;
  std::vector<ProvenanceRow> ordering_provenance;
  for (const auto &path : inputs) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception &e) {
      throw DataError("score file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (j.value("record", "") != "score") throw DataError("'" + path.string() + "' is not a score file");
    const auto model = j.at("model").get<std::string>();
    const auto provenance = provenance_from_json(j.at("provenance"));
    if (j.contains("ordering_scores")) {
      orderings.push_back({model, j.at("ordering_scores").get<std::vector<double>>()});
      ordering_provenance.push_back({model, provenance});
    } else if (!metrics_sections) {
      throw DataError("'" + path.string() + "' is not an ordering-sweep score");
    } else if (j.contains("metrics")) {
      add_metrics(doc, MetricsReport::from_json(j.at("metrics")));
    } else if (j.contains("placement")) {
      add_placement(doc, model, placement_from_json(j.at("placement")), provenance);
    } else {
      throw DataError("score file '" + path.string() + "' has no results");
    }
  }
  if (orderings.size() >= 2) {
    try {
      doc.spearman = render_spearman_matrix(orderings);
    } catch (const std::invalid_argument &e) {
      throw DataError(std::string("cannot compare ordering scores: ") + e.what());
    }
  } else if (!metrics_sections) {
    throw DataError("compare needs at least two ordering-sweep score files");
  }
  doc.provenance.insert(doc.provenance.end(), ordering_provenance.begin(), ordering_provenance.end());
  return doc;
}

int do_report(const ReportArgs &a, bool metrics_sections, std::ostream &out) {
  ExportFormat format;
  try {
    format = export_format_from_string(a.format);
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  auto doc = doc_from_scores(a.inputs, metrics_sections);
  doc.generated_at = a.timestamp.empty() ? utc_now() : a.timestamp;
  const auto text = export_report(doc, format);
  if (a.out.empty()) {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    out << "wrote " << to_string(format) << " report to " << a.out.string() << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Positional bias audit harness for multimodal chat models", "posbias"};
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr (repeatable)");

  IngestArgs ingest;
  auto *ingest_cmd = app.add_subcommand("ingest", "Build probe files from source tables and manifests");
  ingest_cmd->add_option("--kind", ingest.kind, "mcq, captions, clips or rag")->required();
  ingest_cmd->add_option("--input", ingest.input, "Source table or manifest")->required();
  ingest_cmd->add_option("--out", ingest.out, "Probe file to write")->required();
  ingest_cmd->add_option("--pool", ingest.pool, "Caption manifest supplying RAG distractor images");
  ingest_cmd->add_option("--options", ingest.options, "Options per question (mcq, rag)")->capture_default_str();
  ingest_cmd->add_option("--mode", ingest.mode, "image_only or pair (captions)")->capture_default_str();
  ingest_cmd->add_option("--distractors", ingest.distractors, "Distractors per probe (captions, rag)")
      ->capture_default_str();
  ingest_cmd->add_option("--seed", ingest.seed, "Sampling seed (captions, clips, rag)");
  ingest_cmd->add_option("--target-seconds", ingest.target_seconds, "Constructed video length (clips)")
      ->capture_default_str();
  ingest_cmd->add_option("--fps", ingest.fps, "Constructed video frame rate (clips)")->capture_default_str();

  GenArgs gen;
  auto *gen_cmd = app.add_subcommand("gen", "Expand probes into swap variants or placement groups");
  auto *gen_probes = gen_cmd->add_option("--probes", gen.probes, "Probe file");
  auto *gen_captions = gen_cmd->add_option("--captions", gen.captions, "Caption manifest to build probes from");
  gen_probes->excludes(gen_captions);
  gen_cmd->add_option("--mode", gen.mode, "image_only or pair (with --captions)")->capture_default_str();
  gen_cmd->add_option("--distractors", gen.distractors, "Distractors per probe (with --captions)")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Sampling seed (with --captions)");
  gen_cmd->add_option("--rule", gen.rule, "swap or rotate")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Variant file to write")->required();

  RunArgs run_args;
  auto *run_cmd = app.add_subcommand("run", "Execute an experiment into a trial store");
  run_cmd->add_option("-c,--config", run_args.config, "Run config file")->required();
  run_cmd->add_option("--seed", run_args.seed, "Override the config seed");
  run_cmd->add_flag("--retry-failed", run_args.retry_failed, "Re-issue calls whose cached outcome is a failure");

  ScoreArgs score;
  auto *score_cmd = app.add_subcommand("score", "Score a trial store");
  score_cmd->add_option("--store", score.store, "Trial store")->required();
  score_cmd->add_option("--out", score.out, "Score file to write")->required();
  score_cmd->add_option("--label", score.label, "Model label in reports (default: model id)");
  score_cmd->add_flag("--print", score.print, "Also print the score as a table");

  ReportArgs compare;
  auto *compare_cmd = app.add_subcommand("compare", "Spearman matrix over ordering-sweep scores");
  compare_cmd->add_option("inputs", compare.inputs, "Ordering-sweep score files")->required();
  compare_cmd->add_option("--out", compare.out, "Output file (default: stdout)");
  compare_cmd->add_option("--format", compare.format, "table-text, flat-tabular or structured")
      ->capture_default_str();
  compare_cmd->add_option("--timestamp", compare.timestamp, "Fixed generation timestamp");

  ReportArgs report;
  auto *report_cmd = app.add_subcommand("report", "Assemble score files into a report");
  report_cmd->add_option("inputs", report.inputs, "Score files")->required();
  report_cmd->add_option("--out", report.out, "Output file (default: stdout)");
  report_cmd->add_option("--format", report.format, "table-text, flat-tabular or structured")
      ->capture_default_str();
  report_cmd->add_option("--timestamp", report.timestamp, "Fixed generation timestamp");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kConfigError;
  }

  try {
    if (*ingest_cmd) return do_ingest(ingest, out, err, verbosity);
    if (*gen_cmd) return do_gen(gen, out);
    if (*run_cmd) return do_run(run_args, out, err, verbosity);
    if (*score_cmd) return do_score(score, out);
    if (*compare_cmd) return do_report(compare, false, out);
    if (*report_cmd) return do_report(report, true, out);
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const EndpointError &e) {
    err << "endpoint failure (" << to_string(e.error_class()) << "): " << e.what() << "\n";
    return kEndpointFailure;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const json::exception &e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error &e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace posbias::cli
