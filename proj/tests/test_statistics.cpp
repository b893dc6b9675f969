#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eqrc/error.hpp"
#include "eqrc/experiments.hpp"
#include "eqrc/statistics.hpp"
#include "support.hpp"

using namespace eqrc;

namespace {

const double kHalfRoot3 = std::sqrt(3.0) / 2.0;

std::vector<MeasurementRecord> records_for(const Setting& right, std::uint64_t n, std::uint64_t seed,
                                           const GaugeKey& key) {
    ExperimentSpec spec;
    spec.setting_pairs = {SettingPair{Setting::canonical(), right}};
    spec.pairs_per_setting = n;
    spec.seed = seed;
    spec.key = key;
    return run_experiment(spec).group_records(0);
}

// Midpoint-grid integral of the (+,+,+) cell: the left column is the gauge,
// the second column is the negated right outcome at threshold (1 + x2) / 2.
double triple_oracle(double x2, unsigned j) {
    constexpr int kL = 2000;
    constexpr int kT = 4096;
    long hits = 0;
    for (int it = 0; it < kT; ++it) {
        const double t = (it + 0.5) / kT;
        const int g = eqrc::test::sine_sign(j, t);
        for (int il = 0; il < kL; ++il) {
            const double lambda = (il + 0.5) / kL;
            const int right = lambda <= (1.0 + x2) / 2.0 ? -g : g;
            if (g == 1 && -right == 1) ++hits;
        }
    }
    return static_cast<double>(hits) / (static_cast<double>(kL) * kT);
}

}  // namespace

TEST_CASE("estimate_from_sum") {
    const auto e = estimate_from_sum(-500, 1000);
    CHECK(e.value == -0.5);
    CHECK(e.n_samples == 1000);
    CHECK(e.std_error == doctest::Approx(std::sqrt(0.75 / 1000)));
    CHECK(estimate_from_sum(7, 7).std_error == 0.0);
    CHECK_THROWS_AS(estimate_from_sum(0, 0), InvalidArgument);
}

TEST_CASE("join_pairs rejects unmatched and duplicate indices") {
    const Setting a = Setting::canonical();
    std::vector<MeasurementRecord> recs{
        {1, Station::left, a, Outcome::plus},
        {1, Station::right, a, Outcome::minus},
        {2, Station::left, a, Outcome::plus},
    };
    try {
        (void)join_pairs(recs);
        FAIL("expected PairingError");
    } catch (const PairingError& e) {
        CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
    recs.push_back({2, Station::right, a, Outcome::plus});
    CHECK(join_pairs(recs).size() == 2);
    recs.push_back({2, Station::right, a, Outcome::plus});
    CHECK_THROWS_AS(join_pairs(recs), PairingError);
    CHECK_THROWS_AS(estimate_expectation(std::span<const MeasurementRecord>(recs)), PairingError);
}

TEST_CASE("expectation examples") {
    const auto rad = GaugeKey::rademacher(3);
    const auto equal = estimate_expectation(records_for(Setting::canonical(), 1000, 3, rad));
    CHECK(equal.value == -1.0);
    CHECK(equal.std_error == 0.0);

    const auto ab = estimate_expectation(records_for(Setting(0.5, kHalfRoot3), 1'000'000, 1, rad));
    CHECK(std::abs(ab.value - (-0.5)) <= 0.0045);
    CHECK(ab.std_error == doctest::Approx(std::sqrt((1 - ab.value * ab.value) / 1e6)));

    const auto ac = estimate_expectation(records_for(Setting(-0.5, kHalfRoot3), 1'000'000, 2, rad));
    CHECK(std::abs(ac.value - 0.5) <= 0.0045);
}

TEST_CASE("marginals") {
    const auto one = records_for(Setting(0.5, kHalfRoot3), 10000, 4, GaugeKey::constant());
    CHECK(estimate_marginals(one).left.value == 1.0);

    for (unsigned j = 1; j <= 6; ++j) {
        const auto key = GaugeKey::rademacher(j);
        const auto recs = records_for(Setting(0.5, kHalfRoot3), 1'000'000, 10 + j, key);
        const auto m = estimate_marginals(recs);
        CAPTURE(j);
        CHECK(std::abs(m.left.value) <= 0.0045);
        CHECK(std::abs(m.right.value) <= 0.0045);
    }

    // E_left is the run's mean gauge value, exactly.
    const auto key = GaugeKey::rademacher(3);
    ExperimentSpec spec;
    spec.setting_pairs = {SettingPair{Setting::canonical(), Setting(0.5, kHalfRoot3)}};
    spec.pairs_per_setting = 5000;
    spec.seed = 77;
    spec.key = key;
    const auto recs = run_experiment(spec).group_records(0);
    const PairStream stream(group_seed(77, 0), group_first_index(5000, 0));
    std::int64_t gauge_sum = 0;
    for (const auto& e : stream.take(5000)) gauge_sum += value(gauge_eval(key, e.t));
    CHECK(estimate_marginals(recs).left.value == static_cast<double>(gauge_sum) / 5000.0);
}

TEST_CASE("property: estimate is invariant under permutation and gauge replacement") {
    auto recs = records_for(Setting::from_angle(1.1), 20000, 9, GaugeKey::rademacher(2));
    const auto base = estimate_expectation(recs);
    std::mt19937_64 g(1);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(recs.begin(), recs.end(), g);
        const auto e = estimate_expectation(recs);
        CHECK(e.value == base.value);
        CHECK(e.std_error == base.std_error);
    }
    for (const auto& key : {GaugeKey::constant(), GaugeKey::rademacher(6), GaugeKey::rademacher_rarb(3, 5)}) {
        CHECK(estimate_expectation(records_for(Setting::from_angle(1.1), 20000, 9, key)).value == base.value);
    }
}

TEST_CASE("std error scales as one over root N") {
    const auto spread = [](std::uint64_t n) {
        std::vector<double> v;
        for (std::uint64_t s = 0; s < 20; ++s) {
            v.push_back(estimate_expectation(records_for(Setting(0.5, kHalfRoot3), n, 1000 + s, GaugeKey::rademacher(3)))
                            .value);
        }
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::sqrt(ss / (v.size() - 1));
    };
    const double ratio = spread(2500) / spread(10000);
    CHECK(ratio > 1.3);
    CHECK(ratio < 3.0);
}

TEST_CASE("triple table oracle values") {
    CHECK(triple_oracle(0.5, 3) == doctest::Approx(3.0 / 8.0).epsilon(1e-3));
    CHECK(triple_oracle(-0.5, 3) == doctest::Approx(1.0 / 8.0).epsilon(1e-3));
}

TEST_CASE("triple tables at the Bell vectors") {
    const auto v = bell_vectors();
    const auto events = sample_pair_stream(7, 1'000'000);
    const auto key = GaugeKey::rademacher(3);
    const auto abc = build_triple_table(TripleKind::abc_prime, events, key, v);
    const auto acb = build_triple_table(TripleKind::ab_prime_c, events, key, v);

    for (const auto* t : {&abc, &acb}) {
        CHECK(t->total() == events.size());
        CHECK(std::accumulate(t->cells().begin(), t->cells().end(), std::uint64_t{0}) == t->total());
        // The appended column is constant +1.
        for (auto s1 : {Outcome::plus, Outcome::minus}) {
            for (auto s2 : {Outcome::plus, Outcome::minus}) CHECK(t->count(s1, s2, Outcome::minus) == 0);
        }
    }
    const auto P = Outcome::plus;
    const double f1 = abc.fraction(P, P, P);
    const double f2 = acb.fraction(P, P, P);
    CHECK(std::abs(f1 - triple_oracle(0.5, 3)) <= 0.005);
    CHECK(std::abs(f2 - triple_oracle(-0.5, 3)) <= 0.005);
    CHECK(std::abs(f1 - f2) > 4.0 * std::hypot(abc.fraction_std_error(P, P, P), acb.fraction_std_error(P, P, P)));

    const auto flat = build_triple_table(TripleKind::abc_prime, events, GaugeKey::constant(), v);
    CHECK(std::abs(flat.fraction(P, P, P) - 0.75) <= 0.005);

    CHECK_THROWS_AS(build_triple_table(TripleKind::abc_prime, events, key, SettingTriple{v.a, v.a, v.c}),
                    InvalidArgument);
}
