// Throughput of the hot paths: variant generation, simulation, audit runs
// and metric computation.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "posbias/metrics.hpp"
#include "posbias/runner.hpp"
#include "posbias/simulate.hpp"
#include "posbias/variants.hpp"

using namespace posbias;

namespace {

ProbeItem probe(std::size_t id, std::size_t m) {
  ProbeItem item;
  item.id = "p" + std::to_string(id);
  item.mode = ProbeMode::text_only;
  item.stem = "Which option fits " + item.id + "?";
  std::vector<SlotContent> contents;
  for (std::size_t i = 1; i <= m; ++i) {
    contents.push_back({ModalityAtom::from_text(item.id + " option " + std::to_string(i)), std::nullopt});
  }
  item.slots = make_slots(std::move(contents));
  item.correct_index = 1 + id % m;
  return item;
}

std::vector<ProbeItem> probes(std::size_t n, std::size_t m) {
  std::vector<ProbeItem> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(probe(i, m));
  return out;
}

const BiasProfile kProfile = BiasProfile::with_uniform_fallback({0.8, 0.3, 0.3, 0.9});

std::vector<TrialRecord> audit(std::size_t n) {
  const auto items = probes(n, 4);
  SimulatedModel model(kProfile, 1);
  TrialStore store;
  run_swap_audit(items, model, store);
  return store.latest();
}

}  // namespace

static void BM_SwapVariants(benchmark::State &state) {
  const auto item = probe(0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(swap_variants(item));
}
BENCHMARK(BM_SwapVariants)->Arg(2)->Arg(4)->Arg(8);

static void BM_EnumerateOrderings(benchmark::State &state) {
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_orderings(static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_EnumerateOrderings)->Arg(4)->Arg(6)->Arg(8);

static void BM_SimulateResponse(benchmark::State &state) {
  const auto variants = swap_variants(probe(0, 4)).variants;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_response(variants[i % 4], kProfile, 7, "p0#k=" + std::to_string(i % 4)));
    ++i;
  }
}
BENCHMARK(BM_SimulateResponse);

static void BM_SimulatedAudit(benchmark::State &state) {
  const auto items = probes(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) {
    SimulatedModel model(kProfile, 1);
    TrialStore store;
    benchmark::DoNotOptimize(run_swap_audit(items, model, store));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 4);
}
BENCHMARK(BM_SimulatedAudit)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_TallyAndPia(benchmark::State &state) {
  const auto records = audit(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto t = tally(records);
    benchmark::DoNotOptimize(pia(t));
    benchmark::DoNotOptimize(circular_accuracy(records));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}
BENCHMARK(BM_TallyAndPia)->Arg(1000)->Arg(10000);

static void BM_Spearman(benchmark::State &state) {
  std::mt19937_64 gen(3);
  std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = double(gen() % 100);
    b[i] = double(gen() % 100);
  }
  for (auto _ : state) benchmark::DoNotOptimize(spearman(a, b));
}
BENCHMARK(BM_Spearman)->Arg(24)->Arg(1000)->Arg(100000);
BENCHMARK_MAIN();
