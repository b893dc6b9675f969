#include "eqrc/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eqrc/error.hpp"

namespace eqrc {

ExpectationEstimate estimate_from_sum(std::int64_t sum, std::uint64_t n) {
    if (n == 0) throw InvalidArgument("cannot estimate an expectation from zero samples");
    const double v = static_cast<double>(sum) / static_cast<double>(n);
    const double var = std::max(0.0, 1.0 - v * v);
    return ExpectationEstimate{v, n, std::sqrt(var / static_cast<double>(n))};
}

std::vector<JoinedPair> join_pairs(std::span<const MeasurementRecord> records) {
    std::vector<const MeasurementRecord*> left;
    std::vector<const MeasurementRecord*> right;
    left.reserve(records.size() / 2);
    right.reserve(records.size() / 2);
    for (const auto& r : records) (r.station == Station::left ? left : right).push_back(&r);

    const auto by_index = [](const MeasurementRecord* x, const MeasurementRecord* y) {
        return x->pair_index < y->pair_index;
    };
    const auto check_unique = [&](std::vector<const MeasurementRecord*>& v, Station s) {
        if (!std::is_sorted(v.begin(), v.end(), by_index)) std::stable_sort(v.begin(), v.end(), by_index);
        const auto dup = std::adjacent_find(v.begin(), v.end(), [](auto* x, auto* y) {
            return x->pair_index == y->pair_index;
        });
        if (dup != v.end()) {
            throw PairingError("duplicate " + std::string(to_string(s)) + " record for pair_index " +
                               std::to_string((*dup)->pair_index));
        }
    };
    check_unique(left, Station::left);
    check_unique(right, Station::right);

    std::vector<JoinedPair> out;
    out.reserve(std::min(left.size(), right.size()));
    std::size_t i = 0;
    std::size_t k = 0;
    while (i < left.size() || k < right.size()) {
        if (k == right.size() || (i < left.size() && left[i]->pair_index < right[k]->pair_index)) {
            throw PairingError("pair_index " + std::to_string(left[i]->pair_index) + " has no R record");
        }
        if (i == left.size() || right[k]->pair_index < left[i]->pair_index) {
            throw PairingError("pair_index " + std::to_string(right[k]->pair_index) + " has no L record");
        }
        out.push_back(JoinedPair{left[i]->pair_index, *left[i], *right[k]});
        ++i;
        ++k;
    }
    return out;
}

ExpectationEstimate estimate_expectation(std::span<const JoinedPair> pairs) {
    ExpectationAccumulator acc;
    for (const auto& p : pairs) acc.add(p.left.outcome, p.right.outcome);
    return acc.estimate();
}

ExpectationEstimate estimate_expectation(std::span<const MeasurementRecord> records) {
    const auto pairs = join_pairs(records);
    return estimate_expectation(std::span<const JoinedPair>(pairs));
}

Marginals estimate_marginals(std::span<const MeasurementRecord> records) {
    const auto pairs = join_pairs(records);
    ExpectationAccumulator l;
    ExpectationAccumulator r;
    for (const auto& p : pairs) {
        l.add(value(p.left.outcome));
        r.add(value(p.right.outcome));
    }
    return Marginals{l.estimate(), r.estimate()};
}

double TripleTable::fraction(Outcome s1, Outcome s2, Outcome s3) const noexcept {
    if (total_ == 0) return 0.0;
    return static_cast<double>(count(s1, s2, s3)) / static_cast<double>(total_);
}

double TripleTable::fraction_std_error(Outcome s1, Outcome s2, Outcome s3) const noexcept {
    if (total_ == 0) return 0.0;
    const double p = fraction(s1, s2, s3);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(total_));
}

TripleTable build_triple_table(TripleKind kind, std::span<const PairEvent> events, const GaugeKey& key,
                               const SettingTriple& settings) {
    const auto& [a, b, c] = settings;
    if (a == b || a == c || b == c) throw InvalidArgument("triple settings must be distinct");
    validate(key);

    const Setting& measured = kind == TripleKind::abc_prime ? b : c;
    TripleTable table;
    for (const auto& e : events) {
        const Outcome first = measure_left(a, e, key);
        const Outcome second = flip(measure_right(measured, e, key));
        table.add(first, second, Outcome::plus);
    }
    return table;
}

}  // namespace eqrc
