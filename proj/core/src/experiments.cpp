#include "eqrc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "eqrc/error.hpp"
#include "eqrc/random.hpp"

namespace eqrc {

namespace {

// Stream index reserved for the switching schedule; group streams use 0..G-1.
constexpr std::uint64_t kScheduleStream = 0x8000000000000000ULL;

// Uniform integer in [0, bound) from 64 random bits (multiply-shift).
std::size_t bounded(std::uint64_t bits, std::size_t bound) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::size_t>((static_cast<u128>(bits) * bound) >> 64);
}

template <typename Visit>
void simulate_group(const ExperimentSpec& spec, std::size_t group, const SettingPair& canonical, Visit&& visit) {
    const PairStream stream(group_seed(spec.seed, group), group_first_index(spec.pairs_per_setting, group));
    for (std::uint64_t k = 0; k < spec.pairs_per_setting; ++k) {
        const PairEvent e = stream.at(k);
        visit(e, measure_left(canonical.left, e, spec.key), measure_right(canonical.right, e, spec.key));
    }
}

template <typename Fn>
void for_each_group_parallel(std::size_t groups, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(groups, std::max(1U, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t g = 0; g < groups; ++g) fn(g);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t g = next++; g < groups; g = next++) fn(g);
        });
    }
}

std::vector<SettingPair> canonicalize(const std::vector<SettingPair>& pairs) {
    std::vector<SettingPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(rotate_to_canonical(p));
    return out;
}

void push_pair(std::vector<TaggedRecord>& out, std::size_t group, const SettingPair& canonical, std::uint64_t n,
               Outcome left, Outcome right) {
    out.push_back(TaggedRecord{group, MeasurementRecord{n, Station::left, canonical.left, left}});
    out.push_back(TaggedRecord{group, MeasurementRecord{n, Station::right, canonical.right, right}});
}

}  // namespace

void validate(const ExperimentSpec& spec) {
    if (spec.setting_pairs.empty()) throw InvalidArgument("experiment needs at least one setting pair");
    if (spec.pairs_per_setting == 0) throw InvalidArgument("pairs per setting must be at least 1");
    validate(spec.key);
}

std::uint64_t group_seed(std::uint64_t master_seed, std::size_t group) noexcept {
    return derive_seed(master_seed, group);
}

std::uint64_t group_first_index(std::uint64_t pairs_per_setting, std::size_t group) noexcept {
    return static_cast<std::uint64_t>(group) * pairs_per_setting + 1;
}

std::vector<MeasurementRecord> RunDataset::group_records(std::size_t group) const {
    std::vector<MeasurementRecord> out;
    for (const auto& r : records) {
        if (r.group == group) out.push_back(r.record);
    }
    return out;
}

SettingPair rotate_to_canonical(const SettingPair& pair) {
    const Setting& l = pair.left;
    const Setting& r = pair.right;
    return SettingPair{Setting::canonical(),
                       Setting(l.b2() * r.b2() + l.b3() * r.b3(), l.b2() * r.b3() - l.b3() * r.b2())};
}

RunDataset run_experiment(const ExperimentSpec& spec) {
    validate(spec);
    RunDataset ds;
    ds.spec = spec;
    ds.canonical_pairs = canonicalize(spec.setting_pairs);
    const std::size_t groups = ds.canonical_pairs.size();
    ds.records.reserve(2 * groups * spec.pairs_per_setting);

    if (spec.switching == Switching::fixed) {
        for (std::size_t g = 0; g < groups; ++g) {
            simulate_group(spec, g, ds.canonical_pairs[g], [&](const PairEvent& e, Outcome l, Outcome r) {
                push_pair(ds.records, g, ds.canonical_pairs[g], e.n, l, r);
            });
        }
        ds.grouped = true;
        return ds;
    }

    // Random switching: each emission picks uniformly among the setting pairs
    // that still have events left. Group g consumes its own stream in order,
    // so per-group events are identical to the fixed schedule; only the pair
    // index (emission number) differs.
    std::vector<PairStream> streams;
    std::vector<std::uint64_t> used(groups, 0);
    std::vector<std::size_t> open(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        streams.emplace_back(group_seed(spec.seed, g), group_first_index(spec.pairs_per_setting, g));
        open[g] = g;
    }
    const std::uint64_t schedule_seed = derive_seed(spec.seed, kScheduleStream);
    const std::uint64_t total = groups * spec.pairs_per_setting;
    for (std::uint64_t emission = 0; emission < total; ++emission) {
        const std::size_t slot = bounded(splitmix_at(schedule_seed, emission), open.size());
        const std::size_t g = open[slot];
        PairEvent e = streams[g].at(used[g]);
        e.n = emission + 1;
        const SettingPair& cp = ds.canonical_pairs[g];
        push_pair(ds.records, g, cp, e.n, measure_left(cp.left, e, spec.key), measure_right(cp.right, e, spec.key));
        if (++used[g] == spec.pairs_per_setting) open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
    }
    return ds;
}

std::vector<ExpectationEstimate> estimate_experiment(const ExperimentSpec& spec) {
    validate(spec);
    const auto canonical = canonicalize(spec.setting_pairs);
    std::vector<ExpectationEstimate> out(canonical.size());
    for_each_group_parallel(canonical.size(), [&](std::size_t g) {
        ExpectationAccumulator acc;
        simulate_group(spec, g, canonical[g], [&](const PairEvent&, Outcome l, Outcome r) { acc.add(l, r); });
        out[g] = acc.estimate();
    });
    return out;
}

RunDataset sort_wigner_sets(const RunDataset& interleaved) {
    if (interleaved.records.empty()) throw InvalidArgument("cannot sort an empty run into Wigner sets");
    for (const auto& r : interleaved.records) {
        if (!r.group) {
            throw FormatError("record for pair_index " + std::to_string(r.record.pair_index) +
                              " carries no setting-pair tag");
        }
        if (*r.group >= interleaved.canonical_pairs.size()) {
            throw FormatError("record for pair_index " + std::to_string(r.record.pair_index) +
                              " refers to unknown setting pair " + std::to_string(*r.group));
        }
    }
    RunDataset out = interleaved;
    std::stable_sort(out.records.begin(), out.records.end(), [](const TaggedRecord& x, const TaggedRecord& y) {
        if (*x.group != *y.group) return *x.group < *y.group;
        return x.record.pair_index < y.record.pair_index;
    });
    out.grouped = true;
    return out;
}

SettingTriple bell_vectors() {
    const double h = std::numbers::sqrt3 / 2.0;
    return SettingTriple{Setting(1.0, 0.0), Setting(0.5, h), Setting(-0.5, h)};
}

std::vector<SettingPair> bell_setting_pairs() {
    const auto [a, b, c] = bell_vectors();
    return {SettingPair{a, b}, SettingPair{a, c}, SettingPair{b, c}};
}

std::vector<SettingPair> chsh_setting_pairs() {
    const double s = 1.0 / std::numbers::sqrt2;
    const Setting a = Setting::canonical();
    return {SettingPair{a, Setting(s, s)}, SettingPair{a, Setting(s, -s)}, SettingPair{a, Setting(s, -s)},
            SettingPair{a, Setting(-s, -s)}};
}

SettingTriple wigner_vectors() {
    const double h = std::numbers::sqrt3 / 2.0;
    return SettingTriple{Setting(1.0, 0.0), Setting(-0.5, h), Setting(0.5, h)};
}

namespace {

std::vector<InequalityTerm> simulate_terms(const ExperimentSpec& spec) {
    const auto estimates = estimate_experiment(spec);
    std::vector<InequalityTerm> terms;
    for (std::size_t g = 0; g < estimates.size(); ++g) {
        InequalityTerm t(estimates[g]);
        t.settings = spec.setting_pairs[g];
        terms.push_back(std::move(t));
    }
    return terms;
}

}  // namespace

InequalityReport run_bell_suite(std::uint64_t seed, std::uint64_t n, const GaugeKey& key) {
    const ExperimentSpec spec{bell_setting_pairs(), n, seed, key, Switching::fixed};
    auto t = simulate_terms(spec);
    return bell_check(t[0], t[1], t[2], EvaluationMode::simulated_per_space);
}

InequalityReport run_chsh_suite(std::uint64_t seed, std::uint64_t n, const GaugeKey& key,
                                const std::vector<SettingPair>& pairs) {
    if (pairs.size() != 4) throw InvalidArgument("CHSH needs exactly four setting pairs");
    const ExperimentSpec spec{pairs, n, seed, key, Switching::fixed};
    auto t = simulate_terms(spec);
    return chsh_check(t[0], t[1], t[2], t[3], EvaluationMode::simulated_per_space);
}

InequalityReport run_wigner_suite(std::uint64_t seed, std::uint64_t n, const GaugeKey& key) {
    const auto [a, b, c] = wigner_vectors();
    ExperimentSpec spec{{SettingPair{a, b}, SettingPair{a, c}, SettingPair{c, b}}, n, seed, key, Switching::fixed};
    validate(spec);
    const auto canonical = canonicalize(spec.setting_pairs);
    std::vector<PairCounts> counts(canonical.size());
    for_each_group_parallel(canonical.size(), [&](std::size_t g) {
        PairCounts pc;
        simulate_group(spec, g, canonical[g], [&](const PairEvent&, Outcome l, Outcome r) {
            if (l == Outcome::plus && r == Outcome::plus) ++pc.plus_plus;
        });
        pc.total = spec.pairs_per_setting;
        counts[g] = pc;
    });
    auto report = wigner_check(WignerCounts{counts[0], counts[1], counts[2]}, EvaluationMode::simulated_per_space);
    for (std::size_t g = 0; g < report.terms.size(); ++g) report.terms[g].settings = spec.setting_pairs[g];
    return report;
}

std::vector<SweepPoint> sweep_angle(std::uint64_t seed, std::uint64_t n_per_step, std::size_t steps,
                                    const GaugeKey& key) {
    if (steps < 2) throw InvalidArgument("sweep needs at least 2 steps");
    ExperimentSpec spec{{}, n_per_step, seed, key, Switching::fixed};
    std::vector<double> thetas;
    for (std::size_t k = 0; k < steps; ++k) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(steps);
        thetas.push_back(theta);
        spec.setting_pairs.push_back(SettingPair{Setting::canonical(), Setting::from_angle(theta)});
    }
    const auto estimates = estimate_experiment(spec);
    std::vector<SweepPoint> out;
    for (std::size_t k = 0; k < steps; ++k) out.push_back(SweepPoint{thetas[k], estimates[k]});
    return out;
}

}  // namespace eqrc
