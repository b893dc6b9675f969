#include "eqrc/model.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <sstream>

#include "eqrc/error.hpp"
#include "eqrc/random.hpp"

namespace eqrc {

namespace {

// Beyond this order 2^j * t is an integer for every double t < 1, so the
// Rademacher function would collapse to +1.
constexpr unsigned kMaxRademacherOrder = 52;

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
    std::uint64_t v = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || text.empty()) {
        throw InvalidArgument("invalid " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace

Setting::Setting(double b2, double b3) : b2_(b2), b3_(b3) {
    if (!std::isfinite(b2) || !std::isfinite(b3)) {
        throw InvalidArgument("setting components must be finite");
    }
    const double norm2 = b2 * b2 + b3 * b3;
    if (norm2 == 0.0) {
        throw InvalidArgument("setting must not be the zero vector");
    }
    if (std::abs(norm2 - 1.0) > kNormTolerance) {
        const double norm = std::hypot(b2, b3);
        b2_ = b2 / norm;
        b3_ = b3 / norm;
    }
}

Setting Setting::from_angle(double theta_radians) {
    return Setting(std::cos(theta_radians), std::sin(theta_radians));
}

double Setting::angle() const noexcept { return std::atan2(b3_, b2_); }

std::string to_string(const Setting& s) {
    std::ostringstream os;
    os.precision(17);
    os << '[' << s.b2() << ", " << s.b3() << ']';
    return os.str();
}

void validate(const PairEvent& e) {
    if (e.n == 0) throw InvalidArgument("pair index must be positive");
    if (!(e.lambda >= 0.0 && e.lambda < 1.0)) throw InvalidArgument("lambda outside [0,1)");
    if (!(e.t >= 0.0 && e.t < 1.0)) throw InvalidArgument("t outside [0,1)");
}

GaugeKey GaugeKey::parse(std::string_view text) {
    if (text == "one") return constant();

    const auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    if (colon == std::string_view::npos || (kind != "rademacher" && kind != "rademacher-rarb")) {
        throw InvalidArgument("unknown gauge '" + std::string(text) +
                              "' (expected one | rademacher:j=K | rademacher-rarb:j=K,seed=S)");
    }

    std::optional<std::uint64_t> j;
    std::optional<std::uint64_t> seed;
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw InvalidArgument("malformed gauge parameter '" + std::string(item) + "'");
        const auto name = item.substr(0, eq);
        const auto val = item.substr(eq + 1);
        if (name == "j") {
            j = parse_u64(val, "gauge order j");
        } else if (name == "seed") {
            seed = parse_u64(val, "gauge seed");
        } else {
            throw InvalidArgument("unknown gauge parameter '" + std::string(name) + "'");
        }
    }
    if (!j) throw InvalidArgument("gauge '" + std::string(text) + "' needs j=K");

    GaugeKey key;
    key.j = static_cast<unsigned>(*j);
    if (kind == "rademacher") {
        if (seed) throw InvalidArgument("seed= only applies to rademacher-rarb");
        key.mode = GaugeMode::rademacher;
    } else {
        if (!seed) throw InvalidArgument("rademacher-rarb needs seed=S");
        key.mode = GaugeMode::rademacher_times_rarb;
        key.rarb_seed = seed;
    }
    if (*j > kMaxRademacherOrder) throw InvalidArgument("gauge order j must be in 1..52");
    validate(key);
    return key;
}

void validate(const GaugeKey& key) {
    if (key.mode == GaugeMode::constant_plus_one) return;
    if (key.j < 1 || key.j > kMaxRademacherOrder) throw InvalidArgument("gauge order j must be in 1..52");
    if (key.mode == GaugeMode::rademacher_times_rarb && !key.rarb_seed) {
        throw InvalidArgument("rademacher-rarb gauge needs a seed");
    }
}

std::string to_string(const GaugeKey& key) {
    switch (key.mode) {
        case GaugeMode::constant_plus_one:
            return "one";
        case GaugeMode::rademacher:
            return "rademacher:j=" + std::to_string(key.j);
        case GaugeMode::rademacher_times_rarb:
            return "rademacher-rarb:j=" + std::to_string(key.j) + ",seed=" + std::to_string(key.rarb_seed.value_or(0));
    }
    return {};
}

Outcome outcome_from_int(int v) {
    if (v == 1) return Outcome::plus;
    if (v == -1) return Outcome::minus;
    throw InvalidArgument("outcome must be +1 or -1, got " + std::to_string(v));
}

std::string_view to_string(Station s) noexcept { return s == Station::left ? "L" : "R"; }

Station station_from_string(std::string_view s) {
    if (s == "L") return Station::left;
    if (s == "R") return Station::right;
    throw InvalidArgument("station must be L or R, got '" + std::string(s) + "'");
}

Outcome rademacher(unsigned j, double t) {
    if (j < 1 || j > kMaxRademacherOrder) throw InvalidArgument("rademacher order j must be in 1..52");
    if (!(t >= 0.0 && t < 1.0)) throw InvalidArgument("rademacher argument t outside [0,1)");
    // sin(2^(j+1) pi t) > 0  <=>  frac(2^j t) in (0, 1/2). Scaling by 2^j is
    // exact, so the sign is decided without evaluating the sine.
    const double x = std::ldexp(t, static_cast<int>(j));
    const double frac = x - std::floor(x);
    return frac <= 0.5 ? Outcome::plus : Outcome::minus;
}

Outcome rarb(std::uint64_t seed, double t) noexcept {
    const auto bits = std::bit_cast<std::uint64_t>(t);
    return (mix64(mix64(seed) ^ bits) & 1U) ? Outcome::minus : Outcome::plus;
}

Outcome gauge_eval(const GaugeKey& key, double t) {
    switch (key.mode) {
        case GaugeMode::constant_plus_one:
            return Outcome::plus;
        case GaugeMode::rademacher:
            return rademacher(key.j, t);
        case GaugeMode::rademacher_times_rarb: {
            const Outcome r = rademacher(key.j, t);
            return rarb(key.rarb_seed.value_or(0), t) == Outcome::plus ? r : flip(r);
        }
    }
    throw InvalidArgument("invalid gauge mode");
}

PairEvent PairStream::at(std::uint64_t offset) const noexcept {
    return PairEvent{first_index_ + offset,
                     to_unit_interval(splitmix_at(seed_, 2 * offset)),
                     to_unit_interval(splitmix_at(seed_, 2 * offset + 1))};
}

std::vector<PairEvent> PairStream::take(std::uint64_t count) const {
    std::vector<PairEvent> out;
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) out.push_back(at(k));
    return out;
}

std::vector<PairEvent> sample_pair_stream(std::uint64_t seed, std::uint64_t count) {
    if (count == 0) throw InvalidArgument("pair count must be at least 1");
    return PairStream(seed).take(count);
}

Outcome measure_left(const Setting& /*a*/, const PairEvent& e, const GaugeKey& key) {
    return gauge_eval(key, e.t);
}

Outcome measure_right(const Setting& b, const PairEvent& e, const GaugeKey& key) {
    const Outcome g = gauge_eval(key, e.t);
    return e.lambda <= right_threshold(b) ? flip(g) : g;
}

}  // namespace eqrc
