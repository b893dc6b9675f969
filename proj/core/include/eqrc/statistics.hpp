#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "eqrc/model.hpp"

namespace eqrc {

// Mean of +-1 data with its normal-approximation standard error
// sqrt((1 - value^2) / n).
struct ExpectationEstimate {
    double value = 0.0;
    std::uint64_t n_samples = 0;
    double std_error = 0.0;
};

// Builds an estimate from the integer sum of n values in {+1, -1}. The sum is
// exact, so the result does not depend on accumulation order.
ExpectationEstimate estimate_from_sum(std::int64_t sum, std::uint64_t n);

class ExpectationAccumulator {
public:
    void add(int v) noexcept {
        sum_ += v;
        ++n_;
    }
    void add(Outcome left, Outcome right) noexcept { add(value(left) * value(right)); }
    void merge(const ExpectationAccumulator& other) noexcept {
        sum_ += other.sum_;
        n_ += other.n_;
    }

    std::int64_t sum() const noexcept { return sum_; }
    std::uint64_t count() const noexcept { return n_; }
    ExpectationEstimate estimate() const { return estimate_from_sum(sum_, n_); }

private:
    std::int64_t sum_ = 0;
    std::uint64_t n_ = 0;
};

struct JoinedPair {
    std::uint64_t pair_index = 0;
    MeasurementRecord left;
    MeasurementRecord right;
};

// Joins L and R records on pair_index, ordered by pair_index. Throws
// PairingError naming the first index that has no partner or appears twice
// for the same station.
std::vector<JoinedPair> join_pairs(std::span<const MeasurementRecord> records);

ExpectationEstimate estimate_expectation(std::span<const MeasurementRecord> records);
ExpectationEstimate estimate_expectation(std::span<const JoinedPair> pairs);

struct Marginals {
    ExpectationEstimate left;
    ExpectationEstimate right;
};

Marginals estimate_marginals(std::span<const MeasurementRecord> records);

// Eight-cell table of (s1, s2, s3) in {+1,-1}^3.
class TripleTable {
public:
    void add(Outcome s1, Outcome s2, Outcome s3) noexcept {
        ++counts_[cell(s1, s2, s3)];
        ++total_;
    }

    std::uint64_t count(Outcome s1, Outcome s2, Outcome s3) const noexcept { return counts_[cell(s1, s2, s3)]; }
    std::uint64_t total() const noexcept { return total_; }
    double fraction(Outcome s1, Outcome s2, Outcome s3) const noexcept;
    // Binomial standard error of fraction().
    double fraction_std_error(Outcome s1, Outcome s2, Outcome s3) const noexcept;
    const std::array<std::uint64_t, 8>& cells() const noexcept { return counts_; }

    // Cell order used by cells(): bit 2 is s1 == -1, bit 1 is s2 == -1, bit 0 is s3 == -1.
    static constexpr std::size_t cell(Outcome s1, Outcome s2, Outcome s3) noexcept {
        return (s1 == Outcome::minus ? 4U : 0U) | (s2 == Outcome::minus ? 2U : 0U) | (s3 == Outcome::minus ? 1U : 0U);
    }

private:
    std::array<std::uint64_t, 8> counts_{};
    std::uint64_t total_ = 0;
};

// abc': columns (A(a), A(b), A'(c) = +1).  ab'c: columns (A(a), A(c), A'(b) = +1).
// A(a) is the left outcome, A(x) = -B(x) for the right wing, both under the
// same gauge value for each event; the appended A' column carries no gauge.
enum class TripleKind { abc_prime, ab_prime_c };

struct SettingTriple {
    Setting a;
    Setting b;
    Setting c;
};

TripleTable build_triple_table(TripleKind kind, std::span<const PairEvent> events, const GaugeKey& key,
                               const SettingTriple& settings);

}  // namespace eqrc
