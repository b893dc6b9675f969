#pragma once

// Local outcome functions for a two-wing spin-correlation experiment.
//
// The left wing returns the global gauge value for every hidden variable; the
// right wing flips sign at the threshold lambda <= (1 + b2) / 2 of its own
// setting. Both wings see the same gauge value because the time parameter t
// travels with the emitted pair. Nothing here reads the other wing's setting.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eqrc {

// Unit vector in the plane perpendicular to the emission axis.
class Setting {
public:
    static constexpr double kNormTolerance = 1e-12;

    // Normalizes unless |b2^2 + b3^2 - 1| <= kNormTolerance, in which case the
    // components are kept bit-for-bit. Throws InvalidArgument on a zero or
    // non-finite vector.
    Setting(double b2, double b3);

    static Setting from_angle(double theta_radians);
    static Setting canonical() { return Setting(1.0, 0.0); }

    double b2() const noexcept { return b2_; }
    double b3() const noexcept { return b3_; }
    double angle() const noexcept;
    double dot(const Setting& other) const noexcept { return b2_ * other.b2_ + b3_ * other.b3_; }

    friend bool operator==(const Setting&, const Setting&) = default;

private:
    double b2_;
    double b3_;
};

std::string to_string(const Setting& s);

// (left-wing setting; right-wing setting) of one experiment.
struct SettingPair {
    Setting left = Setting::canonical();
    Setting right = Setting::canonical();

    friend bool operator==(const SettingPair&, const SettingPair&) = default;
};

// One emitted pair. `lambda` is the hidden variable, `t` the dimensionless
// time-like parameter at which the gauge is evaluated in both wings.
struct PairEvent {
    std::uint64_t n = 0;
    double lambda = 0.0;
    double t = 0.0;

    friend bool operator==(const PairEvent&, const PairEvent&) = default;
};

void validate(const PairEvent& e);

enum class GaugeMode { constant_plus_one, rademacher, rademacher_times_rarb };

struct GaugeKey {
    GaugeMode mode = GaugeMode::rademacher;
    unsigned j = 3;
    std::optional<std::uint64_t> rarb_seed;

    static GaugeKey constant() { return {GaugeMode::constant_plus_one, 1, std::nullopt}; }
    static GaugeKey rademacher(unsigned j) { return {GaugeMode::rademacher, j, std::nullopt}; }
    static GaugeKey rademacher_rarb(unsigned j, std::uint64_t seed) {
        return {GaugeMode::rademacher_times_rarb, j, seed};
    }

    // Accepts "one", "rademacher:j=K" and "rademacher-rarb:j=K,seed=S".
    static GaugeKey parse(std::string_view text);

    friend bool operator==(const GaugeKey&, const GaugeKey&) = default;
};

void validate(const GaugeKey& key);
std::string to_string(const GaugeKey& key);

// +1 is detector 1, -1 is detector 2.
enum class Outcome : std::int8_t { plus = 1, minus = -1 };

constexpr int value(Outcome o) noexcept { return static_cast<int>(o); }
constexpr Outcome flip(Outcome o) noexcept { return o == Outcome::plus ? Outcome::minus : Outcome::plus; }
Outcome outcome_from_int(int v);

enum class Station : std::uint8_t { left, right };

std::string_view to_string(Station s) noexcept;
Station station_from_string(std::string_view s);

struct MeasurementRecord {
    std::uint64_t pair_index = 0;
    Station station = Station::left;
    Setting setting = Setting::canonical();
    Outcome outcome = Outcome::plus;

    friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

// sign(sin(2^(j+1) * pi * t)), with the zeros of the sine mapped to +1.
// Requires j >= 1 and 0 <= t < 1.
Outcome rademacher(unsigned j, double t);

// Keyed deterministic +-1 function of t (the "arbitrary" extra gauge factor).
Outcome rarb(std::uint64_t seed, double t) noexcept;

Outcome gauge_eval(const GaugeKey& key, double t);

// Deterministic stream of pair events. Event k (0-based) depends only on
// (seed, k), so any index range can be generated on its own.
class PairStream {
public:
    PairStream(std::uint64_t seed, std::uint64_t first_index = 1) noexcept
        : seed_(seed), first_index_(first_index) {}

    PairEvent at(std::uint64_t offset) const noexcept;
    std::vector<PairEvent> take(std::uint64_t count) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t first_index() const noexcept { return first_index_; }

private:
    std::uint64_t seed_;
    std::uint64_t first_index_;
};

// Events n = 1..count. Throws InvalidArgument if count == 0.
std::vector<PairEvent> sample_pair_stream(std::uint64_t seed, std::uint64_t count);

// The setting argument is accepted and ignored.
Outcome measure_left(const Setting& a, const PairEvent& e, const GaugeKey& key);
Outcome measure_right(const Setting& b, const PairEvent& e, const GaugeKey& key);

// Threshold on lambda below (or at) which the right wing reports -gauge.
inline double right_threshold(const Setting& b) noexcept { return 0.5 * (1.0 + b.b2()); }

enum class PairClass { equal, different };

constexpr PairClass classify_pair(Outcome left, Outcome right) noexcept {
    return value(left) * value(right) == 1 ? PairClass::equal : PairClass::different;
}

}  // namespace eqrc
