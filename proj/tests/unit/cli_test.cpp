#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "posbias/atomic_file.hpp"
#include "posbias/cli.hpp"
#include "posbias/config.hpp"

using namespace posbias;
using nlohmann::json;
using posbias::testing::TempDir;
using posbias::testing::write_images;
using posbias::testing::write_text;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json minimal_profile_config() {
  return {{"probes", "probes.jsonl"}, {"profile", {{"hit_rate", {0.8, 0.3, 0.3, 0.9}}}}, {"seed", 7}};
}

std::string config_error(const json &raw) {
  try {
    validate_config(raw, "/tmp");
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

void write_captions(const TempDir &dir, std::size_t n) {
  const auto images = write_images(dir.path(), n);
  std::string body;
  for (std::size_t i = 0; i < n; ++i) {
    body += json{{"id", "c" + std::to_string(i)},
                 {"image_path", images[i].filename().string()},
                 {"caption", "caption " + std::to_string(i)}}
                .dump() +
            "\n";
  }
  write_text(dir / "captions.jsonl", body);
}

void write_mcq(const TempDir &dir, std::size_t n) {
  std::string body = "id\tquestion\toption_1\toption_2\toption_3\toption_4\tanswer_label\timage_path\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = std::to_string(i);
    body += "q" + id + "\tQuestion " + id + "?\tw" + id + "\tx" + id + "\ty" + id + "\tz" + id + "\t" +
            std::string(1, char('A' + i % 4)) + "\t\n";
  }
  write_text(dir / "mcq.tsv", body);
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const auto c = validate_config(minimal_profile_config(), "/work");
  EXPECT_EQ(c.experiment, ExperimentKind::swap_audit);
  EXPECT_EQ(c.probes, "/work/probes.jsonl");
  EXPECT_EQ(c.parallelism, 1u);
  EXPECT_EQ(c.cache_dir, "/work/.posbias-cache");
  EXPECT_EQ(c.output, "/work/trials.jsonl");
  EXPECT_EQ(c.template_id, "default");
  EXPECT_EQ(c.seed, 7u);
  ASSERT_TRUE(c.profile.has_value());
  EXPECT_EQ(c.profile->fallback, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(c.digest().size(), 16u);
}

TEST(Config, DigestIgnoresKeyOrder) {
  const auto a = validate_config(json::parse(R"({"seed":7,"probes":"p","profile":{"hit_rate":[1,1]}})"), "/w");
  const auto b = validate_config(json::parse(R"({"profile":{"hit_rate":[1,1]},"probes":"p","seed":7})"), "/w");
  EXPECT_EQ(a.digest(), b.digest());
  auto c = a;
  c.seed = 8;
  EXPECT_NE(a.digest(), c.digest());
}

TEST(Config, BothModelSourcesNamed) {
  auto raw = minimal_profile_config();
  raw["endpoint"] = {{"base_url", "http://localhost:1/v1"}, {"model", "m"}};
  const auto msg = config_error(raw);
  EXPECT_NE(msg.find("'endpoint'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'profile'"), std::string::npos) << msg;
}

TEST(Config, MissingModelSource) {
  auto raw = minimal_profile_config();
  raw.erase("profile");
  EXPECT_NE(config_error(raw).find("model source"), std::string::npos);
}

TEST(Config, SimulatedNeedsSeed) {
  auto raw = minimal_profile_config();
  raw.erase("seed");
  const auto msg = config_error(raw);
  EXPECT_NE(msg.find("'seed'"), std::string::npos);
  EXPECT_NE(msg.find("reproducible"), std::string::npos);
}

TEST(Config, NegativeParallelism) {
  auto raw = minimal_profile_config();
  raw["parallelism"] = -2;
  EXPECT_NE(config_error(raw).find("'parallelism'"), std::string::npos);
}

TEST(Config, UnknownFieldAndSecrets) {
  auto raw = minimal_profile_config();
  raw["paralelism"] = 2;
  EXPECT_NE(config_error(raw).find("paralelism"), std::string::npos);

  json ep = {{"probes", "p"}, {"endpoint", {{"base_url", "http://h/v1"}, {"model", "m"}, {"api_key", "x"}}}};
  EXPECT_NE(config_error(ep).find("api_key_env"), std::string::npos);
  ep["endpoint"].erase("api_key");
  ep["endpoint"]["api_key_env"] = "POSBIAS_SURELY_UNSET_VAR";
  EXPECT_NE(config_error(ep).find("POSBIAS_SURELY_UNSET_VAR"), std::string::npos);
}

TEST(Config, EndpointFields) {
  json raw = {{"probes", "p"},
              {"endpoint",
               {{"base_url", "http://h:8000/v1"}, {"model", "m"}, {"rate", 2.5}, {"timeout_ms", 1500}, {"temperature", 0}}}};
  const auto c = validate_config(raw, "/w");
  ASSERT_TRUE(c.endpoint.has_value());
  EXPECT_EQ(c.endpoint->rate_limit, 2.5);
  EXPECT_EQ(c.endpoint->timeout.count(), 1500);
  EXPECT_FALSE(c.seed.has_value());
}

TEST(Cli, UnknownFlagIsConfigError) {
  const auto r = invoke({"score", "--nope"});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(invoke({}).code, cli::kConfigError);
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
}

TEST(Cli, GenPairTwiceIsIdentical) {
  TempDir dir;
  write_captions(dir, 8);
  const auto captions = (dir / "captions.jsonl").string();
  const auto a = invoke({"gen", "--captions", captions, "--mode", "pair", "--seed", "7", "--out", (dir / "a.jsonl").string()});
  const auto b = invoke({"gen", "--captions", captions, "--mode", "pair", "--seed", "7", "--out", (dir / "b.jsonl").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto content = read_file(dir / "a.jsonl");
  EXPECT_EQ(content, read_file(dir / "b.jsonl"));
  const auto header = json::parse(content.substr(0, content.find('\n')));
  EXPECT_EQ(header.at("provenance").at("seed"), 7);
  EXPECT_EQ(header.at("provenance").at("config_digest").get<std::string>().size(), 16u);
}

TEST(Cli, GenWithoutSeedIsConfigError) {
  TempDir dir;
  write_captions(dir, 8);
  const auto r = invoke({"gen", "--captions", (dir / "captions.jsonl").string(), "--out", (dir / "v.jsonl").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
}

TEST(Cli, MissingInputIsDataError) {
  TempDir dir;
  EXPECT_EQ(invoke({"ingest", "--kind", "mcq", "--input", (dir / "none.tsv").string(), "--out",
                 (dir / "p.jsonl").string()})
                .code,
            cli::kDataError);
}

TEST(Cli, PipelineScoresAndReports) {
  TempDir dir;
  write_mcq(dir, 12);
  ASSERT_EQ(invoke({"ingest", "--kind", "mcq", "--input", (dir / "mcq.tsv").string(), "--out",
                 (dir / "probes.jsonl").string()})
                .code,
            0);
  write_text(dir / "cfg.json", minimal_profile_config().dump());
  const auto run = invoke({"run", "-c", (dir / "cfg.json").string()});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_NE(run.out.find("model calls 48"), std::string::npos) << run.out;
  const auto rerun = invoke({"run", "-c", (dir / "cfg.json").string()});
  EXPECT_NE(rerun.out.find("model calls 0"), std::string::npos) << rerun.out;

  const auto score = invoke({"score", "--store", (dir / "trials.jsonl").string(), "--out", (dir / "score.json").string(),
                          "--label", "sim"});
  ASSERT_EQ(score.code, 0) << score.err;
  const auto artifact = json::parse(read_file(dir / "score.json"));
  EXPECT_EQ(artifact.at("provenance").at("seed"), 7);
  EXPECT_EQ(artifact.at("provenance").at("config_digest"),
            load_config(dir / "cfg.json").digest());

  const auto report = invoke({"report", (dir / "score.json").string(), "--format", "csv", "--out",
                           (dir / "report.csv").string(), "--timestamp", "T0"});
  ASSERT_EQ(report.code, 0) << report.err;
  const auto csv = read_file(dir / "report.csv");
  EXPECT_NE(csv.find("metrics,sim,pia,"), std::string::npos);
  EXPECT_NE(csv.find("provenance,sim,seed,7"), std::string::npos);

  EXPECT_EQ(invoke({"report", (dir / "score.json").string(), "--format", "xlsx"}).code, cli::kConfigError);
}

TEST(Cli, SeedOverrideChangesProvenance) {
  TempDir dir;
  write_mcq(dir, 4);
  invoke({"ingest", "--kind", "mcq", "--input", (dir / "mcq.tsv").string(), "--out", (dir / "probes.jsonl").string()});
  write_text(dir / "cfg.json", minimal_profile_config().dump());
  ASSERT_EQ(invoke({"run", "-c", (dir / "cfg.json").string(), "--seed", "99"}).code, 0);
  const auto store = read_file(dir / "trials.jsonl");
  EXPECT_EQ(json::parse(store.substr(0, store.find('\n'))).at("provenance").at("seed"), 99);
}

TEST(Cli, UnreachableEndpointKeepsPartialStore) {
  TempDir dir;
  write_mcq(dir, 2);
  invoke({"ingest", "--kind", "mcq", "--input", (dir / "mcq.tsv").string(), "--out", (dir / "probes.jsonl").string()});
  const json cfg = {{"probes", "probes.jsonl"},
                    {"endpoint",
                     {{"base_url", "http://127.0.0.1:1/v1"},
                      {"model", "m"},
                      {"rate", 1000},
                      {"retry", {{"max_attempts", 1}}}}}};
  write_text(dir / "cfg.json", cfg.dump());
  const auto r = invoke({"run", "-c", (dir / "cfg.json").string()});
  EXPECT_EQ(r.code, cli::kEndpointFailure) << r.err;
  const auto store = TrialStore::open(dir / "trials.jsonl");
  EXPECT_EQ(store->size(), 8u);
  for (const auto &rec : store->latest()) EXPECT_EQ(rec.error_class, ErrorClass::transport);
}

TEST(Cli, CompareNeedsTwoOrderingScores) {
  TempDir dir;
  auto write_score = [&](const std::string &name, std::vector<double> scores) {
    write_text(dir / name, json{{"record", "score"},
                                {"experiment", "ordering_sweep"},
                                {"model", name},
                                {"provenance", {{"model_id", name}, {"seed", 1}}},
                                {"ordering_scores", scores}}
                               .dump());
  };
  write_score("a.json", {0.1, 0.2, 0.3});
  write_score("b.json", {0.3, 0.2, 0.1});
  const auto r = invoke({"compare", (dir / "a.json").string(), (dir / "b.json").string(), "--timestamp", "T"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("-1.00"), std::string::npos) << r.out;
  EXPECT_EQ(invoke({"compare", (dir / "a.json").string()}).code, cli::kDataError);
}
