#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "eqrc/inequalities.hpp"
#include "eqrc/model.hpp"
#include "eqrc/statistics.hpp"

namespace eqrc {

enum class Switching { fixed, random_switched };

struct ExperimentSpec {
    std::vector<SettingPair> setting_pairs;
    std::uint64_t pairs_per_setting = 1;
    std::uint64_t seed = 0;
    GaugeKey key;
    Switching switching = Switching::fixed;
};

void validate(const ExperimentSpec& spec);

// Seed of the pair stream feeding setting pair `group`.
std::uint64_t group_seed(std::uint64_t master_seed, std::size_t group) noexcept;

// First pair index of `group` in fixed mode: group * pairs_per_setting + 1.
std::uint64_t group_first_index(std::uint64_t pairs_per_setting, std::size_t group) noexcept;

// A measurement record tagged with the setting pair that was active when it
// was taken. Records read from foreign files may be untagged.
struct TaggedRecord {
    std::optional<std::size_t> group;
    MeasurementRecord record;

    friend bool operator==(const TaggedRecord&, const TaggedRecord&) = default;
};

struct RunDataset {
    static constexpr int kSchemaVersion = 1;

    ExperimentSpec spec;
    // Setting pairs as measured, i.e. after rotation to a canonical left wing.
    std::vector<SettingPair> canonical_pairs;
    // Emission order (pair_index ascending, L before R) unless `grouped`.
    std::vector<TaggedRecord> records;
    bool grouped = false;

    std::size_t group_count() const noexcept { return canonical_pairs.size(); }
    std::vector<MeasurementRecord> group_records(std::size_t group) const;
};

// Rotates both settings about the emission axis so the left one becomes
// [1, 0]. The relative angle and its orientation are preserved, and a pair
// that is already canonical comes back bit-for-bit unchanged.
SettingPair rotate_to_canonical(const SettingPair& pair);

RunDataset run_experiment(const ExperimentSpec& spec);

// Per-setting-pair correlation estimates of the run described by `spec`,
// computed without materializing records. Equal to estimate_expectation on
// the corresponding groups of run_experiment(spec).
std::vector<ExpectationEstimate> estimate_experiment(const ExperimentSpec& spec);

// Regroups an interleaved run by setting pair. Throws on an empty dataset or
// on untagged records.
RunDataset sort_wigner_sets(const RunDataset& interleaved);

// a = [1, 0], b = [1/2, sqrt(3)/2], c = [-1/2, sqrt(3)/2]
SettingTriple bell_vectors();

// (a;b), (a;c), (b;c) at the Bell vectors.
std::vector<SettingPair> bell_setting_pairs();

// Canonical CHSH pairs (a;b), (a;c), (d;b), (d;c) with every left setting at [1, 0].
std::vector<SettingPair> chsh_setting_pairs();

InequalityReport run_bell_suite(std::uint64_t seed, std::uint64_t n, const GaugeKey& key);
InequalityReport run_chsh_suite(std::uint64_t seed, std::uint64_t n, const GaugeKey& key,
                                const std::vector<SettingPair>& pairs = chsh_setting_pairs());

// Triple for the Wigner count form with the 60-degree setting as the
// intermediate c: a = [1, 0], b = [-1/2, sqrt(3)/2], c = [1/2, sqrt(3)/2].
SettingTriple wigner_vectors();

// Per-space Wigner evaluation: three separate experiments (a;b), (a;c), (c;b).
InequalityReport run_wigner_suite(std::uint64_t seed, std::uint64_t n, const GaugeKey& key);

struct SweepPoint {
    double theta = 0.0;
    ExpectationEstimate estimate;
};

inline constexpr std::size_t kDefaultSweepSteps = 72;

// Left fixed at [1, 0], right at [cos theta, sin theta] for theta = 2 pi k / steps.
std::vector<SweepPoint> sweep_angle(std::uint64_t seed, std::uint64_t n_per_step, std::size_t steps,
                                    const GaugeKey& key);

}  // namespace eqrc
