#include "eqrc/inequalities.hpp"

#include <cmath>

#include "eqrc/error.hpp"

namespace eqrc {

namespace {

constexpr double kRangeSlack = 1e-12;

void require_correlation(const InequalityTerm& t, std::string_view name) {
    if (!std::isfinite(t.value) || std::abs(t.value) > 1.0 + kRangeSlack) {
        throw InvalidArgument("correlation " + std::string(name) + " = " + std::to_string(t.value) +
                              " outside [-1, 1]");
    }
}

InequalityTerm labelled(InequalityTerm t, std::string label) {
    if (t.label.empty()) t.label = std::move(label);
    return t;
}

InequalityTerm frequency_term(const PairCounts& c, std::string label) {
    InequalityTerm t;
    t.label = std::move(label);
    t.n = c.total;
    if (c.total > 0) {
        t.value = static_cast<double>(c.plus_plus) / static_cast<double>(c.total);
        t.std_error = std::sqrt(t.value * (1.0 - t.value) / static_cast<double>(c.total));
    }
    return t;
}

double quadrature(std::initializer_list<double> xs) {
    double s = 0.0;
    for (double x : xs) s += x * x;
    return std::sqrt(s);
}

}  // namespace

double analytic_expectation(const Setting& a, const Setting& b) noexcept { return -a.dot(b); }

std::string_view to_string(InequalityKind k) noexcept {
    switch (k) {
        case InequalityKind::bell: return "bell";
        case InequalityKind::chsh: return "chsh";
        case InequalityKind::wigner: return "wigner";
    }
    return "";
}

std::string_view to_string(EvaluationMode m) noexcept {
    switch (m) {
        case EvaluationMode::analytic: return "analytic";
        case EvaluationMode::simulated_per_space: return "simulated-per-space";
        case EvaluationMode::simulated_single_space: return "simulated-single-space";
    }
    return "";
}

double InequalityReport::margin_std_error() const noexcept { return std::hypot(lhs_std_error, rhs_std_error); }

double InequalityReport::significance() const noexcept {
    const double se = margin_std_error();
    return se > 0.0 ? margin() / se : 0.0;
}

InequalityReport bell_check(InequalityTerm ab, InequalityTerm ac, InequalityTerm bc, EvaluationMode mode) {
    require_correlation(ab, "E(a,b)");
    require_correlation(ac, "E(a,c)");
    require_correlation(bc, "E(b,c)");

    InequalityReport r;
    r.kind = InequalityKind::bell;
    r.mode = mode;
    r.lhs = std::abs(ab.value - ac.value);
    r.rhs = 1.0 + bc.value;
    r.lhs_std_error = std::hypot(ab.std_error, ac.std_error);
    r.rhs_std_error = bc.std_error;
    r.violated = r.lhs > r.rhs;
    r.terms = {labelled(std::move(ab), "E(a,b)"), labelled(std::move(ac), "E(a,c)"), labelled(std::move(bc), "E(b,c)")};
    return r;
}

InequalityReport chsh_check(InequalityTerm ab, InequalityTerm ac, InequalityTerm db, InequalityTerm dc,
                            EvaluationMode mode) {
    require_correlation(ab, "E(a,b)");
    require_correlation(ac, "E(a,c)");
    require_correlation(db, "E(d,b)");
    require_correlation(dc, "E(d,c)");

    InequalityReport r;
    r.kind = InequalityKind::chsh;
    r.mode = mode;
    r.lhs = std::abs(ab.value + ac.value + db.value - dc.value);
    r.rhs = 2.0;
    r.lhs_std_error = quadrature({ab.std_error, ac.std_error, db.std_error, dc.std_error});
    r.violated = r.lhs > r.rhs;
    r.terms = {labelled(std::move(ab), "E(a,b)"), labelled(std::move(ac), "E(a,c)"),
               labelled(std::move(db), "E(d,b)"), labelled(std::move(dc), "E(d,c)")};
    return r;
}

PairCounts count_plus_plus(std::span<const JoinedPair> pairs) {
    PairCounts c;
    for (const auto& p : pairs) {
        if (p.left.outcome == Outcome::plus && p.right.outcome == Outcome::plus) ++c.plus_plus;
    }
    c.total = pairs.size();
    return c;
}

InequalityReport wigner_check(const WignerCounts& counts, EvaluationMode mode) {
    for (const auto* c : {&counts.ab, &counts.ac, &counts.cb}) {
        if (c->plus_plus > c->total) throw InvalidArgument("n[+,+] exceeds the pair total");
    }
    if (mode == EvaluationMode::simulated_single_space &&
        (counts.ab.total != counts.ac.total || counts.ab.total != counts.cb.total)) {
        throw InvalidArgument("single-space Wigner counts must share one total");
    }

    auto ab = frequency_term(counts.ab, "n[a+,b+]");
    auto ac = frequency_term(counts.ac, "n[a+,c+]");
    auto cb = frequency_term(counts.cb, "n[c+,b+]");

    InequalityReport r;
    r.kind = InequalityKind::wigner;
    r.mode = mode;
    r.lhs = ab.value;
    r.rhs = ac.value + cb.value;
    r.lhs_std_error = ab.std_error;
    r.rhs_std_error = std::hypot(ac.std_error, cb.std_error);
    r.violated = r.lhs > r.rhs;
    if (counts.ab.total > 0 && counts.ab.total == counts.ac.total && counts.ab.total == counts.cb.total) {
        const auto n = static_cast<double>(counts.ab.total);
        const std::uint64_t sum = counts.ac.plus_plus + counts.cb.plus_plus;
        r.lhs = static_cast<double>(counts.ab.plus_plus) / n;
        r.rhs = static_cast<double>(sum) / n;
        r.violated = counts.ab.plus_plus > sum;
    }
    r.terms = {std::move(ab), std::move(ac), std::move(cb)};
    return r;
}

InequalityReport wigner_check_analytic(const SettingTriple& s) {
    const auto p = [](const Setting& x, const Setting& y) {
        InequalityTerm t((1.0 + analytic_expectation(x, y)) / 4.0);
        t.settings = SettingPair{x, y};
        return t;
    };
    auto ab = p(s.a, s.b);
    auto ac = p(s.a, s.c);
    auto cb = p(s.c, s.b);
    ab.label = "P[a+,b+]";
    ac.label = "P[a+,c+]";
    cb.label = "P[c+,b+]";

    InequalityReport r;
    r.kind = InequalityKind::wigner;
    r.mode = EvaluationMode::analytic;
    r.lhs = ab.value;
    r.rhs = ac.value + cb.value;
    r.violated = r.lhs > r.rhs;
    r.terms = {std::move(ab), std::move(ac), std::move(cb)};
    return r;
}

std::vector<CyclicRow> cyclic_concatenate(std::span<const PairEvent> events, const GaugeKey& key,
                                          const SettingTriple& s) {
    validate(key);
    std::vector<CyclicRow> rows;
    rows.reserve(events.size());
    std::uint64_t h = 0;
    for (const auto& e : events) {
        rows.push_back(CyclicRow{++h, measure_left(s.a, e, key), flip(measure_right(s.b, e, key)),
                                 flip(measure_right(s.c, e, key))});
    }
    return rows;
}

InequalityReport bell_check_single_space(std::span<const CyclicRow> rows) {
    ExpectationAccumulator ab;
    ExpectationAccumulator ac;
    ExpectationAccumulator bc;
    for (const auto& r : rows) {
        ab.add(-value(r.a) * value(r.b));
        ac.add(-value(r.a) * value(r.c));
        bc.add(-value(r.b) * value(r.c));
    }
    auto r = bell_check(ab.estimate(), ac.estimate(), bc.estimate(), EvaluationMode::simulated_single_space);
    // Decide on the exact integer sums so rows that sit on the bound compare equal.
    if (!rows.empty()) {
        const auto n = static_cast<std::int64_t>(rows.size());
        const std::int64_t lhs = std::abs(ab.sum() - ac.sum());
        const std::int64_t rhs = n + bc.sum();
        r.lhs = static_cast<double>(lhs) / static_cast<double>(n);
        r.rhs = static_cast<double>(rhs) / static_cast<double>(n);
        r.violated = lhs > rhs;
    }
    return r;
}

WignerCounts wigner_counts_single_space(std::span<const CyclicRow> rows) {
    WignerCounts w;
    for (const auto& r : rows) {
        if (r.a == Outcome::plus && r.b == Outcome::minus) ++w.ab.plus_plus;
        if (r.a == Outcome::plus && r.c == Outcome::minus) ++w.ac.plus_plus;
        if (r.c == Outcome::plus && r.b == Outcome::minus) ++w.cb.plus_plus;
    }
    w.ab.total = w.ac.total = w.cb.total = rows.size();
    return w;
}

std::array<OracleRow, 8> cyclic_oracle() {
    std::array<OracleRow, 8> table{};
    std::size_t i = 0;
    for (int a : {1, -1}) {
        for (int b : {1, -1}) {
            for (int c : {1, -1}) {
                const int e_ab = -a * b;
                const int e_ac = -a * c;
                const int e_bc = -b * c;
                const int lhs = std::abs(e_ab - e_ac);
                const int rhs = 1 + e_bc;
                table[i++] = OracleRow{outcome_from_int(a), outcome_from_int(b), outcome_from_int(c), lhs, rhs,
                                       lhs <= rhs};
            }
        }
    }
    return table;
}

}  // namespace eqrc
