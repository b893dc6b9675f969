#pragma once

// Bell, CHSH and Wigner evaluators, the singlet oracle, and the single-space
// (cyclic) construction together with its exhaustive satisfiability table.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqrc/model.hpp"
#include "eqrc/statistics.hpp"

namespace eqrc {

// Singlet correlation -a.b.
double analytic_expectation(const Setting& a, const Setting& b) noexcept;

enum class InequalityKind { bell, chsh, wigner };
enum class EvaluationMode { analytic, simulated_per_space, simulated_single_space };

std::string_view to_string(InequalityKind k) noexcept;
std::string_view to_string(EvaluationMode m) noexcept;

// One input to an inequality: a correlation or a frequency, with its sample
// size and error. Analytic inputs have n = 0 and zero error.
struct InequalityTerm {
    std::string label;
    std::optional<SettingPair> settings;
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t n = 0;

    InequalityTerm() = default;
    InequalityTerm(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
    InequalityTerm(const ExpectationEstimate& e)  // NOLINT(google-explicit-constructor)
        : value(e.value), std_error(e.std_error), n(e.n_samples) {}
};

struct InequalityReport {
    InequalityKind kind = InequalityKind::bell;
    EvaluationMode mode = EvaluationMode::analytic;
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_std_error = 0.0;
    double rhs_std_error = 0.0;
    bool violated = false;  // lhs > rhs, strictly
    std::vector<InequalityTerm> terms;

    double margin() const noexcept { return lhs - rhs; }
    double margin_std_error() const noexcept;
    // margin() in units of margin_std_error(); 0 when the error is zero.
    double significance() const noexcept;
};

// |E(a,b) - E(a,c)| <= 1 + E(b,c)
InequalityReport bell_check(InequalityTerm ab, InequalityTerm ac, InequalityTerm bc,
                            EvaluationMode mode = EvaluationMode::analytic);

// |E(a,b) + E(a,c) + E(d,b) - E(d,c)| <= 2
InequalityReport chsh_check(InequalityTerm ab, InequalityTerm ac, InequalityTerm db, InequalityTerm dc,
                            EvaluationMode mode = EvaluationMode::analytic);

// n[x+, y+]: pairs where the left wing (setting x) and the right wing
// (setting y) both report +1.
struct PairCounts {
    std::uint64_t plus_plus = 0;
    std::uint64_t total = 0;
};

PairCounts count_plus_plus(std::span<const JoinedPair> pairs);

// Wigner form  n[a+, b+] <= n[a+, c+] + n[c+, b+]  with c the intermediate
// setting. Compared as frequencies; an empty input contributes 0.
struct WignerCounts {
    PairCounts ab;
    PairCounts ac;
    PairCounts cb;
};

// Single-space mode requires the three totals to agree.
InequalityReport wigner_check(const WignerCounts& counts, EvaluationMode mode);

// The same form evaluated on the singlet probabilities P(+,+) = (1 + E) / 4.
InequalityReport wigner_check_analytic(const SettingTriple& settings);

// One single-space row: Bell's functions at a, b, c all evaluated on the same
// hidden variable and time parameter. A(a) is the left outcome and A(x) for
// x in {b, c} is the negated right outcome.
struct CyclicRow {
    std::uint64_t h = 0;
    Outcome a = Outcome::plus;
    Outcome b = Outcome::plus;
    Outcome c = Outcome::plus;
};

std::vector<CyclicRow> cyclic_concatenate(std::span<const PairEvent> events, const GaugeKey& key,
                                          const SettingTriple& settings);

// Row-averaged correlations E(x,y) = mean(-A(x) A(y)) fed to bell_check.
InequalityReport bell_check_single_space(std::span<const CyclicRow> rows);

// n[x+, y+] with the right-wing outcome -A(y), counted on the common rows.
WignerCounts wigner_counts_single_space(std::span<const CyclicRow> rows);

struct OracleRow {
    Outcome a;
    Outcome b;
    Outcome c;
    int lhs;
    int rhs;
    bool satisfied;
};

// All eight assignments (A(a), A(b), A(c)) with the Bell inequality checked
// on the per-row correlations by plain integer arithmetic.
std::array<OracleRow, 8> cyclic_oracle();

}  // namespace eqrc
