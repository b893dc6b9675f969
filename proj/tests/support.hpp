#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "eqrc/model.hpp"

namespace eqrc::test {

// Fixed-seed generator for property loops.
inline std::mt19937_64& rng() {
    static std::mt19937_64 g(20240611);
    return g;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

inline Setting random_setting() { return Setting::from_angle(uniform(0.0, 2.0 * std::numbers::pi)); }

inline PairEvent random_event() {
    PairEvent e;
    e.n = std::uniform_int_distribution<std::uint64_t>(1, 1'000'000)(rng());
    e.lambda = uniform(0.0, 1.0);
    e.t = uniform(0.0, 1.0);
    return e;
}

inline GaugeKey random_key() {
    switch (std::uniform_int_distribution<int>(0, 2)(rng())) {
        case 0: return GaugeKey::constant();
        case 1: return GaugeKey::rademacher(std::uniform_int_distribution<unsigned>(1, 12)(rng()));
        default:
            return GaugeKey::rademacher_rarb(std::uniform_int_distribution<unsigned>(1, 12)(rng()), rng()());
    }
}

// Sign of the sine, computed the slow way.
inline int sine_sign(unsigned j, double t) {
    return std::sin(std::ldexp(1.0, static_cast<int>(j) + 1) * std::numbers::pi * t) < 0.0 ? -1 : 1;
}

}  // namespace eqrc::test
