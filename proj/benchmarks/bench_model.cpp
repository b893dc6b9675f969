#include <benchmark/benchmark.h>

#include <cmath>

#include "eqrc/experiments.hpp"
#include "eqrc/io.hpp"
#include "eqrc/stations.hpp"
#include "eqrc/wire.hpp"

using namespace eqrc;

static void BM_PairStream(benchmark::State& state) {
    const PairStream s(7);
    std::uint64_t k = 0;
    for (auto _ : state) benchmark::DoNotOptimize(s.at(k++));
}
BENCHMARK(BM_PairStream);

static void BM_MeasurePair(benchmark::State& state) {
    const auto events = sample_pair_stream(3, 4096);
    const auto key = GaugeKey::rademacher_rarb(3, 11);
    const Setting b(0.5, std::sqrt(3.0) / 2);
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& e = events[i++ & 4095];
        benchmark::DoNotOptimize(value(measure_left(Setting::canonical(), e, key)) * value(measure_right(b, e, key)));
    }
}
BENCHMARK(BM_MeasurePair);

static void BM_EstimateExperiment(benchmark::State& state) {
    ExperimentSpec spec{bell_setting_pairs(), static_cast<std::uint64_t>(state.range(0)), 1, GaugeKey::rademacher(3),
                        Switching::fixed};
    for (auto _ : state) benchmark::DoNotOptimize(estimate_experiment(spec));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}
BENCHMARK(BM_EstimateExperiment)->Arg(1 << 14)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

static void BM_RunExperimentRandomSwitched(benchmark::State& state) {
    ExperimentSpec spec{bell_setting_pairs(), static_cast<std::uint64_t>(state.range(0)), 1, GaugeKey::rademacher(3),
                        Switching::random_switched};
    for (auto _ : state) benchmark::DoNotOptimize(sort_wigner_sets(run_experiment(spec)));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}
BENCHMARK(BM_RunExperimentRandomSwitched)->Arg(1 << 16)->Unit(benchmark::kMillisecond);

static void BM_WireEmitRoundTrip(benchmark::State& state) {
    const wire::SourceEmit m{123456, 0.123456789012345, 0.987654321098765};
    for (auto _ : state) benchmark::DoNotOptimize(wire::decode_source_message(wire::encode(m)));
}
BENCHMARK(BM_WireEmitRoundTrip);

static void BM_WireReportRoundTrip(benchmark::State& state) {
    const wire::StationReport r{123456, Station::right, Setting(0.5, std::sqrt(3.0) / 2), Outcome::minus, 1234567890};
    for (auto _ : state) benchmark::DoNotOptimize(wire::decode_collator_inbound(wire::encode(r)));
}
BENCHMARK(BM_WireReportRoundTrip);

static void BM_CollatePairId(benchmark::State& state) {
    ExperimentSpec spec{{SettingPair{}}, static_cast<std::uint64_t>(state.range(0)), 1, GaugeKey::rademacher(3),
                        Switching::fixed};
    const auto ds = run_experiment(spec);
    const auto left = reports_from_dataset(ds, Station::left);
    const auto right = reports_from_dataset(ds, Station::right);
    for (auto _ : state) benchmark::DoNotOptimize(collate(left, right, MatchStrategy::pair_id));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CollatePairId)->Arg(1 << 16)->Unit(benchmark::kMillisecond);

static void BM_TripleTable(benchmark::State& state) {
    const auto events = sample_pair_stream(5, static_cast<std::uint64_t>(state.range(0)));
    const auto v = bell_vectors();
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_triple_table(TripleKind::abc_prime, events, GaugeKey::rademacher(3), v));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TripleTable)->Arg(1 << 16);
BENCHMARK_MAIN();
